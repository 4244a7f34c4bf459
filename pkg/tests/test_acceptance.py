"""The ten acceptance criteria, each at its stated tolerance and time budget."""

import csv
import io
import time
from collections import Counter
from pathlib import Path

from colored_egraph import bench
from colored_egraph.cli import EXIT_OK, main
from colored_egraph.colors import ColoredEGraph
from colored_egraph.saturate import ColoredEngine, Limits, check_goal, new_graph, proved_by_cases, run, run_engine
from colored_egraph.scenarios import check_scenario, random_scenario, replay
from colored_egraph.terms import App, ENode, parse_term
from oracles import enumerate_terms

T = parse_term
SUITE = range(1000)
GOLDEN = Path(__file__).parent / "golden"


def fresh(case):
    g = new_graph()
    for t in case.initial_terms():
        g.add(t)
    return g


def same(g, c, a, b):
    return g.colored_find(c, g.lookup_term(T(a))) == g.colored_find(c, g.lookup_term(T(b)))


def test_criterion_01_clone_oracle_equivalence():
    start = time.perf_counter()
    failing = [s for s in SUITE if not check_scenario(random_scenario(s))["empty"]]
    elapsed = time.perf_counter() - start
    assert failing == []
    assert elapsed < 120


def test_criterion_02_max_case():
    start = time.perf_counter()
    case = bench.find_case("max")
    g = fresh(case)
    run(g, case.rules)
    blue, red = sorted(g.colors)
    assert g.colors[blue].label == "(< x y)=true" and g.colors[red].label == "(< x y)=false"
    assert same(g, blue, "(max x y)", "y")
    assert same(g, red, "(max x y)", "x")
    assert not same(g, None, "(max x y)", "x") and not same(g, None, "(max x y)", "y")
    assert time.perf_counter() - start < 1


def test_criterion_03_max_minus_min():
    start = time.perf_counter()
    case = bench.find_case("maxmin_abs")
    g = fresh(case)
    report = run(g, case.rules, Limits(), case.goals)
    (goal,) = case.goals
    blue, red = sorted(g.colors)
    for c in (blue, red):
        assert check_goal(g, c, goal.lhs, goal.rhs)
    assert proved_by_cases(g, goal.lhs, goal.rhs) and report.goals[0]["by_cases"]
    assert time.perf_counter() - start < 5


def test_criterion_04_filter_blowup_and_sharing():
    start = time.perf_counter()
    case = bench.find_case("filter")
    clones = bench.prepare(case, "separate")
    depth_two = []

    def watch(engine, _it):
        if not depth_two and any(len(p) == 2 for p in engine.cs.paths()):
            depth_two.append(sum(1 for p in engine.cs.paths() if len(p) == 2))

    rs = run_engine(clones, case.rules, Limits(), case.goals, on_iteration=watch)
    assert depth_two == [4]
    assert clones.cs.leaf_count() == 16
    assert rs.goals[0]["by_cases"]

    col = bench.prepare(case, "optimized")
    rc = run_engine(col, case.rules, Limits(), case.goals)
    g = col.g
    assert rc.goals[0]["by_cases"] and len(g.leaves()) == 16
    shared = T("(filter p (cons y nil))")
    cls = g.lookup_term(shared)
    target = ENode("filter", (g.lookup_term(App("p")), g.lookup_term(T("(cons y nil)"))))
    black_copies = [n for r in g.classes for n in g.classes[r].nodes if g.canonicalize(n) == g.canonicalize(target)]
    assert len(black_copies) == 1 and cls is not None
    for c, col_ in g.colors.items():
        want = g.colored_canonicalize(c, target)
        for nodes in col_.colored_nodes.values():
            assert all(g.colored_canonicalize(c, n) != want for n in nodes)
    assert time.perf_counter() - start < 30


def test_criterion_05_overhead_reduction():
    cases = bench.load_corpus()
    records, _ = bench.sweep(cases, bench.BenchConfig())
    pairs = bench.overhead_pairs(records)
    with_splits = {f"{r.suite}/{r.case}" for r in records if r.mode == "separate" and r.assumptions}
    assert {c for c, _, _ in pairs} == with_splits and pairs
    ratios = {c: bench.improvement(s, o) for c, s, o in pairs}
    assert all(r >= 2 for r in ratios.values()), ratios
    assert bench.median_improvement(pairs) >= 5


def test_criterion_06_single_hashcons_pass():
    g = ColoredEGraph()
    for s in ["x", "y", "(f x)", "(f y)", "(f (f x))", "(f (g y))"]:
        g.add(T(s))
    blue = g.create_color(None, "blue")
    g.colored_union(blue, g.lookup_term(T("(g y)")), g.lookup_term(T("(f y)")))
    g.union(g.lookup_term(App("x")), g.lookup_term(App("y")))
    g.rebuild()
    g.colored_rebuild(blue)
    assert g.colors[blue].hashcons_passes == 1
    assert same(g, blue, "(f (f x))", "(f (g y))")
    assert not same(g, None, "(f (f x))", "(f (g y))")


# -- property-suite instrumentation ----------------------------------------

MUTATORS = ("add", "union", "colored_add", "colored_union", "create_color", "rebuild",
            "colored_rebuild", "rebuild_all", "prune", "colored_minimize")


def colored_terms(g, c, depth=3):
    """Represented terms of height <= depth, keyed to their c-class."""
    find = lambda i: g.colored_find(c, i)
    nodes = {}
    for r in g.classes:
        for _, n in g.visible_nodes(c, r):
            nodes.setdefault(find(r), set()).add(ENode(n.op, tuple(find(ch) for ch in n.children)))
    level = enumerate_terms(lambda r: nodes.get(r, ()), sorted(nodes), depth)
    return {t: r for r, ts in level.items() for t in ts}


def instrumented(seed, check):
    engine = ColoredEngine()
    g = engine.g
    for name in MUTATORS:
        orig = getattr(g, name)

        def wrapped(*args, _orig=orig, _name=name, **kw):
            out = _orig(*args, **kw)
            check(g, _name, args)
            return out

        setattr(g, name, wrapped)
    replay(random_scenario(seed), engine)
    return g


def test_criterion_07_prune_and_minimize_preserve_classes():
    violations = []
    for seed in SUITE:
        engine = ColoredEngine()
        g = engine.g
        prune, minimize, rebuild = g.prune, g.colored_minimize, g.colored_rebuild

        def preserving(op):
            def run_op(c):
                before = colored_terms(g, c)
                part = {r: g.colored_find(c, r) for r in g.classes}
                out = op(c)
                if colored_terms(g, c) != before or part != {r: g.colored_find(c, r) for r in g.classes}:
                    violations.append((seed, op.__name__, c))
                return out

            return run_op

        def checked_rebuild(c):
            out = rebuild(c)
            if any(len(hs) > 1 for hs in g.holder_classes(c).values()):
                violations.append((seed, "holders", c))
            return out

        g.prune, g.colored_minimize = preserving(prune), preserving(minimize)
        g.colored_rebuild = checked_rebuild
        replay(random_scenario(seed), engine)
    assert violations == []


def test_criterion_08_duplicate_insertion_bound():
    duplicates, repeats, stored = 0, 0, 0
    for seed in SUITE:
        engine = ColoredEngine()
        engine.g.audit = True
        replay(random_scenario(seed), engine)
        log = engine.g.store_log
        stored += len(log)
        duplicates += sum(1 for e in log if e.duplicate)
        counts = Counter((e.color, e.node, e.epoch) for e in log if e.subsumed)
        repeats += sum(1 for k in counts.values() if k > 1)
    assert stored > 0
    assert duplicates == 0
    assert repeats == 0


def test_criterion_09_coarsening_after_every_mutation():
    bad = []

    def check(g, name, args):
        for c, col in g.colors.items():
            below = g.find if col.parent is None else g.colors[col.parent].luf.find
            for r in range(len(g.uf.parent)):
                if col.luf.find(r) != col.luf.find(below(r)):
                    bad.append((name, c, r))
                    return

    calls = 0
    for seed in SUITE:
        g = instrumented(seed, check)
        calls += 1
    assert calls == len(SUITE)
    assert bad == []


def test_criterion_10_table_summary_schema(tmp_path):
    corpus = tmp_path / "corpus" / "loops"
    d = corpus / "grow"
    d.mkdir(parents=True)
    (d / "rules.sexp").write_text("(rule grow (f ?x) => (f (s ?x)))\n")
    (d / "terms.sexp").write_text("(f a)\n")
    d = corpus / "done"
    d.mkdir(parents=True)
    (d / "rules.sexp").write_text("(rule id (f ?x) => ?x)\n")
    (d / "terms.sexp").write_text("(f a)\n")
    out = tmp_path / "out"
    cap = 0.25
    argv = ["bench", "--corpus", str(tmp_path / "corpus"), "--iters", "100000", "--time-cap", str(cap), "--out", str(out)]
    assert main(argv) == EXIT_OK
    text = (out / "summary.csv").read_text()
    assert text.splitlines()[0] == (GOLDEN / "summary.csv").read_text().splitlines()[0]
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["type"] for r in rows] == list(bench.MODES)
    records = list(csv.DictReader(io.StringIO((out / "records.csv").read_text())))
    for row in rows:
        mine = [r for r in records if r["mode"] == row["type"]]
        timeouts = [r for r in mine if r["outcome"] == "timeout"]
        assert int(row["timeout"]) == len(timeouts) == 1 and row["oom"] == "0" and row["cases"] == "2"
        ok_time = sum(float(r["wall_time"]) for r in mine if r["outcome"] == "ok")
        assert abs(float(row["runtime_s"]) - (ok_time + cap)) < 1e-3 + 1e-9
