"""Command line: ``run``, ``prove``, ``bench`` and ``compare``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import bench
from .baseline import CloneEngine, ScheduleMismatch, oracle_compare
from .saturate import ColoredEngine, run_engine
from .scenarios import check_scenario, random_scenario
from .terms import ParseError

log = logging.getLogger("colored_egraph")

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
EXIT_OOM = 4
EXIT_DIFF = 5
EXIT_UNPROVED = 6

_OUTCOME_EXIT = {"ok": EXIT_OK, "timeout": EXIT_TIMEOUT, "oom": EXIT_OOM}


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(text: str):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _case_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", help="corpus case, as NAME or SUITE/NAME")
    p.add_argument("--rules", help="rule file (s-expressions)")
    p.add_argument("--terms", help="initial term file")
    p.add_argument("--goals", help="goal file")


def _limit_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=_positive(int), default=30, help="iteration cap (default 30)")
    p.add_argument("--split-depth", type=_positive(int), default=4, help="nested split cap (default 4)")
    p.add_argument("--time-cap", type=_positive(float), help="seconds")
    p.add_argument("--mem-cap", type=_positive(int), help="bytes of traced allocation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colored-egraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="saturate one case")
    prove_p = sub.add_parser("prove", help="goal verdicts by cases")
    for p in (run_p, prove_p):
        p.add_argument("--mode", choices=bench.MODES, default="optimized")
        _case_args(p)
        _limit_args(p)
        p.add_argument("--dump", action="store_true", help="also write the final graph as JSON")

    bench_p = sub.add_parser("bench", help="sweep a directory of cases in all three modes")
    bench_p.add_argument("--corpus", help="directory of cases (default: bundled corpus)")
    bench_p.add_argument("--suite", help="only this suite")
    bench_p.add_argument("--workers", type=_positive(int), default=1)
    _limit_args(bench_p)

    cmp_p = sub.add_parser("compare", help="oracle diff of colors against clones")
    _case_args(cmp_p)
    _limit_args(cmp_p)
    cmp_p.add_argument("--count", type=_positive(int), default=1000, help="random scenarios (default 1000)")
    return parser


def _load_case(args) -> bench.Case:
    if args.case:
        if args.rules:
            raise UsageError("give either --case or --rules, not both")
        try:
            return bench.find_case(args.case)
        except KeyError:
            raise UsageError(f"no corpus case named {args.case!r}") from None
    if not args.rules:
        raise UsageError("a case is needed: --case NAME or --rules FILE")
    return bench.load_files(args.rules, args.terms, args.goals)


def _config(args, mode: str) -> bench.BenchConfig:
    return bench.BenchConfig(
        mode=mode,
        iterations=args.iters,
        split_depth=args.split_depth,
        time_cap=args.time_cap,
        mem_cap=args.mem_cap,
        seed=args.seed,
    )


def _dump(engine) -> dict:
    if isinstance(engine, CloneEngine):
        return {"/".join(p) or "black": engine.cs.graph(p).dump() for p in engine.cs.paths()}
    return engine.g.dump()


def cmd_run(args, prove: bool = False) -> int:
    case = _load_case(args)
    if prove and not case.goals:
        raise UsageError("prove needs at least one goal (--goals or a case with goals.sexp)")
    cfg = _config(args, args.mode)
    report, engine = bench.run_case(case, cfg)
    record = bench.make_record(case, report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": bench.SCHEMA_VERSION, "case": case.name, "run": report.to_json(),
               "record": record.row()}
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out / "summary.csv").write_text(bench.summary_csv(bench.summarize([record], args.time_cap)))
    if args.dump:
        (out / "graph.json").write_text(json.dumps(_dump(engine), indent=1) + "\n")
    print(f"{case.name} [{args.mode}] {report.stop_reason} after {report.iterations} iterations; "
          f"{report.total_enodes} e-nodes, {report.assumptions} assumptions")
    for g in report.goals:
        verdict = "proved" if g["by_cases"] else "not proved"
        print(f"  {g['goal']}: {verdict}")
        for leaf, ok in sorted(g["leaves"].items()):
            print(f"    {leaf}: {ok}")
    code = _OUTCOME_EXIT.get(report.outcome, EXIT_OK)
    if code == EXIT_OK and prove and not all(g["by_cases"] for g in report.goals):
        return EXIT_UNPROVED
    return code


def cmd_bench(args) -> int:
    cases = bench.discover(args.corpus) if args.corpus else bench.load_corpus()
    if args.suite:
        cases = [c for c in cases if c.suite == args.suite]
    if not cases:
        raise UsageError("no cases found")
    records, reports = bench.sweep(cases, _config(args, "optimized"), workers=args.workers)
    payload = bench.write_outputs(args.out, records, reports, args.time_cap)
    print(bench.summary_csv(payload["summary"]), end="")
    pairs = bench.overhead_pairs(records)
    if not pairs:
        print("no case applied a split; overhead table is empty")
    for case, sep, opt in pairs:
        print(f"{case}: separate {float(sep):.2f}, optimized {float(opt):.2f} e-nodes per assumption")
    return EXIT_OK


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.case or args.rules:
        case = _load_case(args)
        limits = _config(args, "optimized").limits()
        col, clones = bench.prepare(case, "optimized"), bench.prepare(case, "separate")
        run_engine(col, case.rules, limits)
        run_engine(clones, case.rules, limits)
        try:
            diffs = {case.name: oracle_compare(clones, col, [r.lhs for r in case.rules])}
        except ScheduleMismatch as err:
            diffs = {case.name: {"empty": False, "schedule": str(err)}}
    else:
        start = time.perf_counter()
        diffs = {}
        for seed in range(args.seed, args.seed + args.count):
            d = check_scenario(random_scenario(seed))
            if not d["empty"]:
                diffs[f"seed-{seed}"] = d
        log.info("%d scenarios in %.1fs", args.count, time.perf_counter() - start)
    failing = sorted(k for k, v in diffs.items() if not v["empty"])
    (out / "report.json").write_text(
        json.dumps({"schema_version": bench.SCHEMA_VERSION, "diffs": diffs, "failing": failing}, indent=2) + "\n"
    )
    if failing:
        print(f"diffs found: {', '.join(failing)}")
        return EXIT_DIFF
    print("no diffs")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "prove":
            return cmd_run(args, prove=True)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_compare(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValueError) as err:
        print(f"bad input: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
