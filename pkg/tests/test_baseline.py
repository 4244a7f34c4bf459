import pytest

from colored_egraph.baseline import (
    CloneEngine,
    CloneSet,
    ScheduleMismatch,
    UnknownPathError,
    compare_views,
    correspond,
    count_enodes,
    fork,
    oracle_compare,
)
from colored_egraph.bench import find_case, prepare
from colored_egraph.core import EGraph
from colored_egraph.saturate import ColoredEngine, Limits, SplitSpec, run_engine
from colored_egraph.terms import App, ENode, parse_term

T = parse_term


def seeded():
    cs = CloneSet()
    for t in ["true", "false", "(< x y)", "(max x y)", "(< y x)"]:
        cs.root.add(T(t))
    cs.root.rebuild()
    return cs


def spec_for(cs, path, term):
    g = cs.graph(path)
    cls = g.lookup_term(T(term))
    return SplitSpec(cls, term, [(f"{term}=true", g.lookup_term(T("true"))), (f"{term}=false", g.lookup_term(T("false")))])


def test_fork_makes_one_clone_per_branch():
    cs = seeded()
    made = fork(cs, (), spec_for(cs, (), "(< x y)"))
    assert made == [("(< x y)=true",), ("(< x y)=false",)]
    t, f = (cs.graph(p) for p in made)
    lt = cs.root.lookup_term(T("(< x y)"))
    assert t.find(lt) == t.find(t.lookup_term(T("true")))
    assert f.find(lt) == f.find(f.lookup_term(T("false")))
    assert cs.root.find(lt) != cs.root.find(cs.root.lookup_term(T("true")))


def test_nested_forks_give_four_leaves():
    cs = seeded()
    for p in fork(cs, (), spec_for(cs, (), "(< x y)")):
        fork(cs, p, spec_for(cs, p, "(< y x)"))
    assert cs.leaf_count() == 4
    assert len(cs.paths()) == 7


def test_fork_without_branches_is_a_noop():
    cs = seeded()
    assert fork(cs, (), SplitSpec(0, "t", [])) == []
    assert cs.paths() == [()]


def test_duplicate_fork_skipped():
    cs = seeded()
    spec = spec_for(cs, (), "(< x y)")
    fork(cs, (), spec)
    assert fork(cs, (), spec) == []
    assert len(cs.paths()) == 3


def test_unknown_path():
    with pytest.raises(UnknownPathError):
        seeded().graph(("nope",))


def test_clones_are_independent():
    cs = seeded()
    a, b = fork(cs, (), spec_for(cs, (), "(< x y)"))
    ga = cs.graph(a)
    ga.union(ga.add(T("x")), ga.add(T("y")))
    ga.rebuild()
    gb = cs.graph(b)
    assert gb.find(gb.lookup_term(T("x"))) != gb.find(gb.lookup_term(T("y")))
    assert cs.root.find(cs.root.lookup_term(T("x"))) != cs.root.find(cs.root.lookup_term(T("y")))
    assert gb.lookup_term(T("(q z)")) is None
    ga.add(T("(q z)"))
    assert gb.lookup_term(T("(q z)")) is None


def test_counts_at_fork_time():
    cs = seeded()
    base = count_enodes(cs)
    fork(cs, (), spec_for(cs, (), "(< x y)"))
    assert count_enodes(cs) == 3 * base
    eng = ColoredEngine()
    for t in ["(< x y)", "(max x y)", "(< y x)"]:
        eng.add_term(None, T(t))
    before = count_enodes(eng.g)
    assert before == base
    eng.assume(None, "lt", [(T("(< x y)"), T("true"))])
    eng.assume(None, "ge", [(T("(< x y)"), T("false"))])
    eng.rebuild()
    assert count_enodes(eng.g) == before


def test_engine_black_ops_reach_every_clone():
    eng = CloneEngine()
    eng.add_term((), T("a"))
    p = eng.assume((), "A", [(T("b"), T("c"))])
    eng.union_terms((), T("a"), T("d"))
    eng.rebuild()
    g = eng.cs.graph(p)
    assert g.find(g.lookup_term(T("a"))) == g.find(g.lookup_term(T("d")))
    assert g.find(g.lookup_term(T("b"))) == g.find(g.lookup_term(T("c")))
    assert eng.cs.root.find(eng.cs.root.lookup_term(T("b"))) != eng.cs.root.find(eng.cs.root.lookup_term(T("c")))


# -- comparison -----------------------------------------------------------


def view_of(g: EGraph):
    return {r: frozenset(g.classes[r].nodes) for r in g.classes}


def test_correspondence_of_isomorphic_graphs():
    a, b = EGraph(), EGraph()
    a.add(T("(f x)"))
    a.add(T("y"))
    b.add(T("y"))
    b.add(T("(f x)"))
    d = compare_views(view_of(a), view_of(b))
    assert not any(d[k] for k in d if k != "phi")
    assert len(correspond(view_of(a), view_of(b))) == 3


def test_compare_detects_coarser_side():
    a, b = EGraph(), EGraph()
    for g in (a, b):
        g.add(T("(f x)"))
        g.add(T("(f y)"))
    a.union(a.lookup_term(T("x")), a.lookup_term(T("y")))
    a.rebuild()
    d = compare_views(view_of(a), view_of(b))
    assert d["colored_coarser"] and not d["clone_coarser"]


def test_compare_detects_missing_term():
    a, b = EGraph(), EGraph()
    a.add(T("(f x)"))
    b.add(T("x"))
    d = compare_views(view_of(a), view_of(b))
    assert d["only_colored"] == [a.lookup_term(T("(f x)"))]


def test_engines_agree_on_worked_cases():
    for name in ["max", "maxmin_abs", "filter"]:
        case = find_case(name)
        col, clones = prepare(case, "optimized"), prepare(case, "separate")
        run_engine(col, case.rules, Limits())
        run_engine(clones, case.rules, Limits())
        d = oracle_compare(clones, col, [r.lhs for r in case.rules])
        assert d["empty"], name


def test_mismatched_schedules_refuse_comparison():
    col, clones = ColoredEngine(), CloneEngine()
    col.assume(None, "A", [(App("a"), App("b"))])
    with pytest.raises(ScheduleMismatch):
        oracle_compare(clones, col)


def test_clone_verdicts_match_colored_prover():
    for name in ["max", "maxmin_abs", "filter", "insert", "ite"]:
        case = find_case(name)
        rc = run_engine(prepare(case, "optimized"), case.rules, Limits(), case.goals)
        rs = run_engine(prepare(case, "separate"), case.rules, Limits(), case.goals)
        assert rc.goals == rs.goals, name
        assert rc.labels == rs.labels
