"""Case corpus, per-mode runs, overhead metrics and per-suite summaries."""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .baseline import CloneEngine
from .saturate import (
    ColoredEngine,
    Goal,
    Limits,
    Rule,
    RunReport,
    parse_goals,
    parse_rules,
    parse_terms,
    run_engine,
)
from .terms import Term

log = logging.getLogger(__name__)

MODES = ("separate", "monochrome", "optimized")
SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ("schema_version", "type", "suite", "cases", "runtime_s", "oom", "timeout")
RECORD_COLUMNS = (
    "schema_version",
    "suite",
    "case",
    "mode",
    "base_enodes",
    "total_enodes",
    "assumptions",
    "relative_overhead",
    "wall_time",
    "outcome",
    "stop_reason",
    "proved",
)


@dataclass
class Case:
    name: str
    suite: str
    rules: List[Rule]
    terms: List[Term]
    goals: List[Goal] = field(default_factory=list)

    def initial_terms(self) -> List[Term]:
        out = list(self.terms)
        for g in self.goals:
            out += [g.lhs, g.rhs]
        return out


@dataclass
class BenchConfig:
    mode: str = "optimized"
    iterations: int = 30
    split_depth: int = 4
    time_cap: Optional[float] = None
    mem_cap: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        for name in ("iterations", "split_depth", "time_cap", "mem_cap"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")

    def limits(self) -> Limits:
        return Limits(
            iterations=self.iterations,
            split_depth=self.split_depth,
            time_cap=self.time_cap,
            mem_cap=self.mem_cap,
        )


@dataclass
class BenchRecord:
    case: str
    suite: str
    mode: str
    base_enodes: Optional[int]
    total_enodes: int
    assumptions: int
    relative_overhead: Optional[Fraction]
    wall_time: float
    outcome: str
    stop_reason: str = ""
    proved: Optional[bool] = None

    def row(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "case": self.case,
            "mode": self.mode,
            "base_enodes": "" if self.base_enodes is None else self.base_enodes,
            "total_enodes": self.total_enodes,
            "assumptions": self.assumptions,
            "relative_overhead": "" if self.relative_overhead is None else str(self.relative_overhead),
            "wall_time": f"{self.wall_time:.6f}",
            "outcome": self.outcome,
            "stop_reason": self.stop_reason,
            "proved": "" if self.proved is None else str(self.proved).lower(),
        }


# -- corpus --------------------------------------------------------------------


def _read(path: Path) -> str:
    return path.read_text() if path.exists() else ""


def load_case(directory, suite: Optional[str] = None) -> Case:
    """Read ``rules.sexp``, ``terms.sexp`` and ``goals.sexp`` (the last two optional)."""
    d = Path(directory)
    rules_file = d / "rules.sexp"
    if not rules_file.exists():
        raise FileNotFoundError(f"{rules_file} not found")
    return Case(
        name=d.name,
        suite=suite or d.parent.name,
        rules=parse_rules(rules_file.read_text()),
        terms=parse_terms(_read(d / "terms.sexp")),
        goals=parse_goals(_read(d / "goals.sexp")),
    )


def load_files(rules: str, terms: Optional[str] = None, goals: Optional[str] = None) -> Case:
    name = Path(rules).parent.name or "case"
    return Case(
        name=name,
        suite="adhoc",
        rules=parse_rules(Path(rules).read_text()),
        terms=parse_terms(Path(terms).read_text()) if terms else [],
        goals=parse_goals(Path(goals).read_text()) if goals else [],
    )


def corpus_root() -> Path:
    return Path(str(resources.files("colored_egraph") / "corpus"))


def discover(root) -> List[Case]:
    """Every case directory (one holding ``rules.sexp``) below ``root``, sorted by path."""
    root = Path(root)
    found = sorted(p.parent for p in root.rglob("rules.sexp"))
    cases = []
    for d in found:
        suite = d.parent.name if d.parent != root else root.name
        cases.append(load_case(d, suite))
    return cases


def load_corpus(suite: Optional[str] = None) -> List[Case]:
    cases = discover(corpus_root())
    return [c for c in cases if suite is None or c.suite == suite]


def find_case(name: str) -> Case:
    for c in load_corpus():
        if c.name == name or f"{c.suite}/{c.name}" == name:
            return c
    raise KeyError(name)


# -- running -------------------------------------------------------------------


def make_engine(mode: str):
    if mode == "separate":
        return CloneEngine()
    return ColoredEngine(mode=mode)


def prepare(case: Case, mode: str):
    engine = make_engine(mode)
    root = engine.relations()[0]
    for t in case.initial_terms():
        engine.add_term(root, t)
    return engine


def relative_overhead(total: int, base: int, assumptions: int) -> Optional[Fraction]:
    """``(total - base) / assumptions`` exactly; ``None`` marks a case without splits."""
    if assumptions == 0:
        return None
    if assumptions < 0 or base < 0 or total < base:
        raise ValueError(f"bad counts total={total} base={base} assumptions={assumptions}")
    return Fraction(total - base, assumptions)


def enforce_caps(engine, rules: Sequence[Rule], limits: Limits, goals: Sequence[Goal] = ()) -> RunReport:
    """Run under the caps; a breach shows up as the report's outcome, never as an exception."""
    return run_engine(engine, rules, limits, goals)


def run_case(case: Case, config: BenchConfig) -> Tuple[RunReport, object]:
    engine = prepare(case, config.mode)
    report = enforce_caps(engine, case.rules, config.limits(), case.goals)
    return report, engine


def make_record(case: Case, report: RunReport, base: Optional[int] = None) -> BenchRecord:
    base = report.base_enodes if base is None else base
    ov = None
    if base is not None and report.assumptions:
        ov = relative_overhead(report.total_enodes, base, report.assumptions)
    proved = None
    if report.goals:
        proved = all(g["by_cases"] for g in report.goals)
    return BenchRecord(
        case=case.name,
        suite=case.suite,
        mode=report.mode,
        base_enodes=base,
        total_enodes=report.total_enodes,
        assumptions=report.assumptions,
        relative_overhead=ov,
        wall_time=report.wall_time,
        outcome=report.outcome,
        stop_reason=report.stop_reason,
        proved=proved,
    )


def _run_all_modes(args) -> List[Tuple[BenchRecord, dict]]:
    case, config = args
    out: Dict[str, Tuple[BenchRecord, dict]] = {}
    separate_base = None
    for mode in ("separate", "monochrome", "optimized"):
        cfg = BenchConfig(**{**config.__dict__, "mode": mode})
        report, _ = run_case(case, cfg)
        if mode == "separate":
            separate_base = report.base_enodes
        # monochrome measures growth against the clones' pre-split graph
        base = separate_base if mode == "monochrome" else None
        out[mode] = (make_record(case, report, base), report.to_json())
    return [out[m] for m in MODES]


def sweep(cases: Sequence[Case], config: BenchConfig, workers: int = 1) -> Tuple[List[BenchRecord], List[dict]]:
    """Run every case in all three modes; ``workers > 1`` isolates cases in processes."""
    jobs = [(c, config) for c in cases]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_all_modes, jobs))
    else:
        results = [_run_all_modes(j) for j in jobs]
    records, reports = [], []
    for per_case in results:
        for rec, rep in per_case:
            records.append(rec)
            reports.append({"case": rec.case, "suite": rec.suite, **rep})
    return records, reports


# -- reporting -----------------------------------------------------------------


def summarize(records: Iterable[BenchRecord], time_cap: Optional[float] = None) -> List[dict]:
    """Per (mode, suite): run-time with timeouts at the full cap, OOM and timeout counts."""
    table: Dict[Tuple[str, str], dict] = {}
    for r in records:
        row = table.setdefault(
            (r.mode, r.suite),
            {"schema_version": SCHEMA_VERSION, "type": r.mode, "suite": r.suite, "cases": 0,
             "runtime_s": 0.0, "oom": 0, "timeout": 0},
        )
        row["cases"] += 1
        if r.outcome == "oom":
            row["oom"] += 1
        elif r.outcome == "timeout":
            row["timeout"] += 1
            row["runtime_s"] += time_cap if time_cap is not None else r.wall_time
        else:
            row["runtime_s"] += r.wall_time
    order = {m: i for i, m in enumerate(MODES)}
    return [table[k] for k in sorted(table, key=lambda k: (order.get(k[0], 99), k[1]))]


def summary_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({**row, "runtime_s": f"{row['runtime_s']:.3f}"})
    return buf.getvalue()


def records_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RECORD_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def overhead_pairs(records: Sequence[BenchRecord], mode: str = "optimized") -> List[Tuple[str, Fraction, Fraction]]:
    """(case, separate overhead, ``mode`` overhead) for cases where both finished with splits."""
    by = {(r.suite, r.case, r.mode): r for r in records}
    out = []
    for (suite, case, m), sep in sorted(by.items()):
        if m != "separate":
            continue
        other = by.get((suite, case, mode))
        if other is None or sep.outcome != "ok" or other.outcome != "ok":
            continue
        if sep.relative_overhead is None or other.relative_overhead is None:
            continue
        out.append((f"{suite}/{case}", sep.relative_overhead, other.relative_overhead))
    return out


def improvement(sep: Fraction, other: Fraction) -> float:
    """How many times smaller ``other`` is than ``sep``; infinite when ``other`` is zero."""
    if other == 0:
        return float("inf") if sep > 0 else 1.0
    return float(sep / other)


def median_improvement(pairs: Sequence[Tuple[str, Fraction, Fraction]]) -> Optional[float]:
    if not pairs:
        return None
    return statistics.median(improvement(s, o) for _, s, o in pairs)


def write_outputs(out_dir, records: Sequence[BenchRecord], reports: Sequence[dict], time_cap=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = summarize(records, time_cap)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "records": [r.row() for r in records],
        "runs": list(reports),
        "summary": rows,
        "overhead": [
            {"case": c, "separate": str(s), "optimized": str(o)} for c, s, o in overhead_pairs(records)
        ],
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")
    (out / "summary.csv").write_text(summary_csv(rows))
    (out / "records.csv").write_text(records_csv(records))
    return payload
