import json

import pytest
from hypothesis import given, settings, strategies as st

from colored_egraph.core import EGraph
from colored_egraph.terms import App, ENode, MalformedTermError, parse_term
from oracles import congruence_closure, same_classes, subterms


def small_terms(max_leaves=6):
    leaf = st.sampled_from(["a", "b", "c"]).map(App)
    return st.recursive(
        leaf,
        lambda kids: st.one_of(
            st.builds(lambda op, x: App(op, (x,)), st.sampled_from(["f", "g"]), kids),
            st.builds(lambda x, y: App("h", (x, y)), kids, kids),
        ),
        max_leaves=max_leaves,
    )


def check_invariants(g: EGraph) -> None:
    """Canonical hash-cons, congruence closure, and exact parent lists."""
    seen = {}
    for root, cls in g.classes.items():
        assert g.find(root) == root
        for n in cls.nodes:
            assert g.canonicalize(n) == n
            assert g.hashcons[n] == root
            assert seen.setdefault(n, root) == root, f"{n} in two classes"
    for key, val in g.hashcons.items():
        assert g.canonicalize(key) == key
        assert g.find(val) == val
    expected = {r: set() for r in g.classes}
    for root, cls in g.classes.items():
        for n in cls.nodes:
            for ch in n.children:
                expected[ch].add((n, root))
    for root, cls in g.classes.items():
        assert set(cls.parents) == expected[root]


def test_small_example_has_five_classes():
    g = EGraph()
    top = g.add(parse_term("(* a (+ b c))"))
    assert len(g.classes) == 5
    a, b, c = (g.lookup(ENode(s)) for s in "abc")
    plus = g.lookup(ENode("+", (b, c)))
    assert g.hashcons == {
        ENode("a"): a,
        ENode("b"): b,
        ENode("c"): c,
        ENode("+", (b, c)): plus,
        ENode("*", (a, plus)): top,
    }
    check_invariants(g)


def test_add_is_idempotent():
    g = EGraph()
    t = parse_term("(* a (+ b c))")
    assert g.add(t) == g.add(t)
    before = len(g.classes)
    assert g.add(parse_term("(+ b c)")) == g.lookup_term(parse_term("(+ b c)"))
    assert len(g.classes) == before


def test_arity_is_fixed_per_symbol():
    g = EGraph()
    g.add(parse_term("(f a)"))
    with pytest.raises(MalformedTermError):
        g.add(parse_term("(f a b)"))


def test_self_union_marks_nothing():
    g = EGraph()
    x = g.add(App("x"))
    assert g.union(x, x) == (x, False)
    assert g.pending == []


def test_union_concatenates_nodes():
    g = EGraph()
    g.add(parse_term("(* a (+ b c))"))
    b, c = g.lookup_term(App("b")), g.lookup_term(App("c"))
    root, merged = g.union(b, c)
    assert merged and set(g.nodes(root)) == {ENode("b"), ENode("c")}
    assert g.pending == [root]
    g.rebuild()
    check_invariants(g)


def test_rebuild_on_clean_graph():
    g = EGraph()
    g.add(parse_term("(f x)"))
    assert g.rebuild() == 0


def test_congruence_cascades_once():
    g = EGraph()
    fx, fy = g.add(parse_term("(f x)")), g.add(parse_term("(f y)"))
    g.union(g.lookup_term(App("x")), g.lookup_term(App("y")))
    assert g.rebuild() == 1
    assert g.find(fx) == g.find(fy)
    check_invariants(g)


def test_black_congruence_in_nested_terms():
    g = EGraph()
    for s in ["x", "y", "(f x)", "(f y)", "(f (f x))"]:
        g.add(parse_term(s))
    g.union(g.lookup_term(App("x")), g.lookup_term(App("y")))
    g.rebuild()
    assert g.lookup_term(parse_term("(f x)")) == g.lookup_term(parse_term("(f y)"))
    assert g.lookup_term(parse_term("(f (f y))")) == g.lookup_term(parse_term("(f (f x))"))


def test_lookup():
    g = EGraph()
    g.add(parse_term("(* a (+ b c))"))
    assert g.lookup(ENode("a")) == 0
    assert g.lookup(ENode("nope")) is None
    assert g.lookup_term(parse_term("(+ c b)")) is None


def test_canonicalize_replaces_merged_children():
    g = EGraph()
    x, y, z = (g.add(App(s)) for s in "xyz")
    n = ENode("f", (x, z))
    assert g.canonicalize(n) == n
    g.union(y, x)
    assert g.canonicalize(ENode("f", (y, z))) == ENode("f", (min(x, y), z))
    assert g.canonicalize(g.canonicalize(n)) == g.canonicalize(n)


def test_dump_is_json():
    g = EGraph()
    g.add(parse_term("(f (g a))"))
    data = json.loads(json.dumps(g.dump()))
    assert set(data) == {"classes", "union_find"}
    assert data["classes"]["2"]["nodes"] == [["f", [1]]]
    assert data["classes"]["1"]["parents"] == [["f", [1], 2]]


def test_copy_is_independent():
    g = EGraph()
    x, y = g.add(App("x")), g.add(App("y"))
    h = g.copy()
    h.union(x, y)
    h.rebuild()
    assert g.find(x) != g.find(y)
    assert h.find(x) == h.find(y)


@settings(max_examples=150, deadline=None)
@given(st.lists(small_terms(), min_size=1, max_size=5), st.data())
def test_rebuild_matches_congruence_closure(terms, data):
    universe = sorted({s for t in terms for s in subterms(t)}, key=str)
    eqs = data.draw(st.lists(st.tuples(st.sampled_from(universe), st.sampled_from(universe)), max_size=4))
    g = EGraph()
    ids = {t: g.add(t) for t in universe}
    for a, b in eqs:
        g.union(ids[a], ids[b])
    g.rebuild()
    check_invariants(g)
    oracle = same_classes(congruence_closure(terms, eqs))
    ours = {}
    for t in universe:
        ours.setdefault(g.lookup_term(t), set()).add(t)
    assert {frozenset(s) for s in ours.values()} == oracle


@settings(max_examples=100, deadline=None)
@given(st.lists(small_terms(), min_size=1, max_size=5), st.data())
def test_deferred_and_eager_rebuild_agree(terms, data):
    universe = sorted({s for t in terms for s in subterms(t)}, key=str)
    eqs = data.draw(st.lists(st.tuples(st.sampled_from(universe), st.sampled_from(universe)), max_size=5))
    lazy, eager = EGraph(), EGraph()
    lid = {t: lazy.add(t) for t in universe}
    eid = {t: eager.add(t) for t in universe}
    for a, b in eqs:
        lazy.union(lid[a], lid[b])
        eager.union(eid[a], eid[b])
        eager.rebuild()
    lazy.rebuild()
    for s in universe:
        for t in universe:
            assert (lazy.find(lid[s]) == lazy.find(lid[t])) == (eager.find(eid[s]) == eager.find(eid[t]))
