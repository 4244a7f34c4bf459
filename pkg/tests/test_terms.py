import pytest
from hypothesis import given, strategies as st

from colored_egraph.terms import (
    App,
    ParseError,
    Var,
    holes,
    is_ground,
    parse_pattern,
    parse_sexprs,
    parse_term,
    term_size,
)

atoms = st.sampled_from(["a", "b", "x", "nil", "0", "<"])
holes_st = st.sampled_from(["x", "y", "v1"]).map(Var)


def patterns(leaf):
    return st.recursive(
        leaf,
        lambda kids: st.builds(App, st.sampled_from(["f", "g", "+", "*"]), st.lists(kids, min_size=1, max_size=3).map(tuple)),
        max_leaves=8,
    )


def test_pattern_with_holes():
    p = parse_pattern("(* (+ ?v1 1) ?v2)")
    assert p == App("*", (App("+", (Var("v1"), App("1"))), Var("v2")))


def test_bare_hole():
    assert parse_pattern("?x") == Var("x")


def test_nonlinear_pattern_keeps_both_occurrences():
    p = parse_pattern("(f ?x ?x)")
    assert p.args == (Var("x"), Var("x"))
    assert holes(p) == {"x"}


def test_comments_and_whitespace():
    forms = parse_sexprs("; header\n(max x y) ; trailing\n\n  a\n")
    assert forms == [["max", "x", "y"], "a"]


@pytest.mark.parametrize("text", ["(f x", "f x)", "()", "(?f x)", "?", ""])
def test_malformed_input(text):
    with pytest.raises(ParseError):
        parse_pattern(text)


def test_terms_reject_holes():
    with pytest.raises(ParseError):
        parse_term("(f ?x)")


@given(patterns(atoms.map(App) | holes_st))
def test_print_parse_round_trip(p):
    assert parse_pattern(str(p)) == p


@given(patterns(atoms.map(App)))
def test_ground_terms(t):
    assert is_ground(t)
    assert not holes(t)
    assert term_size(t) == str(t).count(" ") + 1
