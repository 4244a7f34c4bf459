"""Equality saturation with conditional rules and automatic case splitting.

One driver (:func:`run_engine`) schedules both representations of a set of
assumptions: the colored e-graph (:class:`ColoredEngine`) and the clone set in
:mod:`colored_egraph.baseline`. Each iteration has a read phase (match every
rule under every relation, evaluate conditions, drop no-op applications), an
apply phase and a rebuild. When an iteration changes nothing, every leaf
relation with a blocked condition is split on its least blocked condition.
"""

from __future__ import annotations

import logging
import time
import tracemalloc
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .colors import ColoredEGraph
from .ematch import ematch_colored, snapshot
from .terms import (
    App,
    ENode,
    Pattern,
    ParseError,
    Term,
    Var,
    holes,
    parse_sexprs,
    to_pattern,
    to_term,
)

log = logging.getLogger(__name__)

TRUE = App("true")
FALSE = App("false")

Path = Tuple[str, ...]
View = Dict[int, frozenset]


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Pattern
    rhs: Pattern
    condition: Optional[Pattern] = None

    def __post_init__(self) -> None:
        if isinstance(self.lhs, Var):
            raise RuleError(f"rule {self.name}: left-hand side cannot be a bare hole")
        bound = holes(self.lhs)
        for part, what in ((self.rhs, "right-hand side"), (self.condition, "condition")):
            if part is None:
                continue
            missing = holes(part) - bound
            if missing:
                names = ", ".join("?" + m for m in sorted(missing))
                raise RuleError(f"rule {self.name}: {what} uses unbound {names}")

    def __str__(self) -> str:
        cond = f"{self.condition} |- " if self.condition is not None else ""
        return f"(rule {self.name} {cond}{self.lhs} => {self.rhs})"


@dataclass(frozen=True)
class Goal:
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return f"(goal {self.lhs} = {self.rhs})"


def parse_rules(text: str) -> List[Rule]:
    rules = []
    for form in parse_sexprs(text):
        if not isinstance(form, list) or not form or form[0] != "rule":
            raise ParseError(f"expected (rule ...), got {form!r}")
        if len(form) == 5 and form[3] == "=>":
            _, name, lhs, _, rhs = form
            cond = None
        elif len(form) == 7 and form[3] == "|-" and form[5] == "=>":
            _, name, cond, _, lhs, _, rhs = form
        else:
            raise ParseError(f"malformed rule {form!r}")
        if not isinstance(name, str):
            raise ParseError(f"rule name must be an atom, got {name!r}")
        rules.append(
            Rule(name, to_pattern(lhs), to_pattern(rhs), None if cond is None else to_pattern(cond))
        )
    return rules


def parse_goals(text: str) -> List[Goal]:
    goals = []
    for form in parse_sexprs(text):
        if not (isinstance(form, list) and len(form) == 4 and form[0] == "goal" and form[2] == "="):
            raise ParseError(f"expected (goal <lhs> = <rhs>), got {form!r}")
        goals.append(Goal(to_term(form[1]), to_term(form[3])))
    return goals


def parse_terms(text: str) -> List[Term]:
    return [to_term(f) for f in parse_sexprs(text)]


# -- run bookkeeping ---------------------------------------------------------


@dataclass
class Limits:
    iterations: int = 30
    node_cap: Optional[int] = None
    time_cap: Optional[float] = None
    mem_cap: Optional[int] = None
    split_depth: int = 4
    max_relations: Optional[int] = None  # cap on assumptions (non-root relations)
    split: bool = True


@dataclass
class SplitSpec:
    condition_class: int
    term: str
    branches: List[Tuple[str, int]]


class Action(NamedTuple):
    rel: object  # engine-specific relation handle
    rule: int
    kind: str  # "rewrite" | "condition"
    root: int
    subst: Tuple[Tuple[str, int], ...]


@dataclass
class RunReport:
    mode: str
    iterations: int = 0
    stop_reason: str = "iteration-cap"
    outcome: str = "ok"
    black_enodes: int = 0
    colored_enodes: Dict[str, int] = field(default_factory=dict)
    labels: List[str] = field(default_factory=list)
    rule_applications: Dict[str, int] = field(default_factory=dict)
    goals: List[dict] = field(default_factory=list)
    wall_time: float = 0.0
    base_enodes: Optional[int] = None
    total_enodes: int = 0
    assumptions: int = 0
    splits: List[Tuple[str, ...]] = field(default_factory=list)
    peak_memory: Optional[int] = None

    def overhead(self, base: Optional[int] = None) -> Optional[Fraction]:
        base = self.base_enodes if base is None else base
        if not self.assumptions or base is None:
            return None
        return Fraction(self.total_enodes - base, self.assumptions)

    def to_json(self) -> dict:
        ov = self.overhead()
        return {
            "mode": self.mode,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "outcome": self.outcome,
            "black_enodes": self.black_enodes,
            "colored_enodes": self.colored_enodes,
            "labels": self.labels,
            "rule_applications": self.rule_applications,
            "goals": self.goals,
            "wall_time": self.wall_time,
            "base_enodes": self.base_enodes,
            "total_enodes": self.total_enodes,
            "assumptions": self.assumptions,
            "relative_overhead": None if ov is None else str(ov),
            "splits": [list(s) for s in self.splits],
        }


# -- views and extraction ----------------------------------------------------


def extract_keys(view: View) -> Dict[int, tuple]:
    """Smallest term of each class as a nested, id-free sort key ``(size, op, kids...)``."""
    size: Dict[int, int] = {}
    changed = True
    while changed:
        changed = False
        for cls, nodes in view.items():
            for n in nodes:
                if all(ch in size for ch in n.children):
                    s = 1 + sum(size[ch] for ch in n.children)
                    if s < size.get(cls, 1 << 60):
                        size[cls] = s
                        changed = True
    keys: Dict[int, tuple] = {}

    def key(cls: int) -> tuple:
        if cls in keys:
            return keys[cls]
        best = None
        for n in view[cls]:
            if all(ch in size for ch in n.children) and 1 + sum(size[ch] for ch in n.children) == size[cls]:
                cand = (size[cls], n.op, *(key(ch) for ch in n.children))
                if best is None or cand < best:
                    best = cand
        keys[cls] = best  # type: ignore[assignment]
        return best  # type: ignore[return-value]

    for cls in sorted(size, key=size.get):  # type: ignore[arg-type]
        key(cls)
    return keys


def render_key(k: tuple) -> str:
    _, op, *kids = k
    if not kids:
        return op
    return "(" + " ".join([op, *map(render_key, kids)]) + ")"


# -- engines ----------------------------------------------------------------


class ColoredEngine:
    """Drives a :class:`ColoredEGraph`; relations are ``None`` (black) or color ids."""

    def __init__(self, g: Optional[ColoredEGraph] = None, mode: str = "optimized"):
        if mode not in ("optimized", "monochrome"):
            raise ValueError(f"unknown colored mode {mode!r}")
        self.g = g if g is not None else ColoredEGraph()
        self.mode = mode
        self.true = self.g.add(TRUE)
        self.false = self.g.add(FALSE)
        self.split_done: set = set()

    # relation bookkeeping
    def relations(self) -> List[Optional[int]]:
        return [None, *sorted(self.g.colors)]

    def path(self, rel: Optional[int]) -> Path:
        if rel is None:
            return ()
        return tuple(self.g.colors[a].label for a in reversed(self.g.ancestors(rel)))

    def rel_of(self, path: Path) -> Optional[int]:
        for rel in self.relations():
            if self.path(rel) == tuple(path):
                return rel
        raise KeyError(f"no relation with path {path!r}")

    def leaves(self) -> List[Optional[int]]:
        return self.g.leaves()

    def depth(self, rel: Optional[int]) -> int:
        return 0 if rel is None else self.g.colors[rel].depth

    def find(self, rel: Optional[int], id: int) -> int:
        return self.g.colored_find(rel, id)

    # term level
    def lookup(self, rel: Optional[int], p: Pattern, subst: Dict[str, int]) -> Optional[int]:
        if isinstance(p, Var):
            return subst[p.name]
        kids = []
        for a in p.args:
            k = self.lookup(rel, a, subst)
            if k is None:
                return None
            kids.append(k)
        return self.g.colored_lookup(rel, ENode(p.op, tuple(kids)))

    def instantiate(self, rel: Optional[int], p: Pattern, subst: Dict[str, int]) -> int:
        if isinstance(p, Var):
            return subst[p.name]
        kids = tuple(self.instantiate(rel, a, subst) for a in p.args)
        node = ENode(p.op, kids)
        if rel is None or self.mode == "monochrome":
            return self.g.add_node(node)
        return self.g.colored_add(rel, node)

    def union(self, rel: Optional[int], a: int, b: int) -> bool:
        if rel is None:
            return self.g.union(a, b)[1]
        return self.g.colored_union(rel, a, b)[1]

    def add_term(self, rel: Optional[int], term: Term) -> int:
        return self.instantiate(rel, term, {})

    def union_terms(self, rel: Optional[int], a: Term, b: Term) -> bool:
        return self.union(rel, self.g.add(a), self.g.add(b))

    def assume(self, parent: Optional[int], label: str, pairs: Iterable[Tuple[Term, Term]]) -> int:
        c = self.g.create_color(parent, label)
        for a, b in pairs:
            self.g.colored_union(c, self.g.add(a), self.g.add(b))
        return c

    def rebuild(self) -> None:
        self.g.rebuild_all()

    # phases
    def read(self, rules: Sequence[Rule]):
        g = self.g
        snap = snapshot(g)
        actions: List[Action] = []
        blocked: List[Tuple[Optional[int], int]] = []
        for ri, rule in enumerate(rules):
            for m in ematch_colored(g, rule.lhs, snapshot=snap):
                subst = m.as_dict()
                if rule.condition is None:
                    if not self._noop(m.color, rule.rhs, subst, m.root):
                        actions.append(Action(m.color, ri, "rewrite", m.root, m.subst))
                else:
                    self._walk(m.color, ri, rule, m.root, m.subst, subst, actions, blocked, True)
        return actions, blocked

    def _walk(self, rel, ri, rule, root, sub_t, subst, actions, blocked, top) -> None:
        cls = self.lookup(rel, rule.condition, subst)
        if cls is None:
            if top:
                actions.append(Action(rel, ri, "condition", root, sub_t))
        else:
            c = self.find(rel, cls)
            if c == self.find(rel, self.true):
                if not self._noop(rel, rule.rhs, subst, root):
                    actions.append(Action(rel, ri, "rewrite", root, sub_t))
                return
            if c != self.find(rel, self.false):
                blocked.append((rel, cls))
        for child in self.g.children[rel]:
            self._walk(child, ri, rule, root, sub_t, subst, actions, blocked, False)

    def _noop(self, rel, rhs: Pattern, subst, root: int) -> bool:
        cls = self.lookup(rel, rhs, subst)
        return cls is not None and self.find(rel, cls) == self.find(rel, root)

    def apply(self, action: Action, rules: Sequence[Rule]) -> None:
        rule = rules[action.rule]
        subst = dict(action.subst)
        if action.kind == "condition":
            self.instantiate(action.rel, rule.condition, subst)  # type: ignore[arg-type]
        else:
            new = self.instantiate(action.rel, rule.rhs, subst)
            self.union(action.rel, action.root, new)

    def view(self, rel: Optional[int]) -> View:
        g = self.g
        out: Dict[int, set] = {}
        for root in sorted(g.classes):
            nodes = [g.colored_canonicalize(rel, n) for _, n in g.visible_nodes(rel, root)]
            if nodes:
                out.setdefault(g.colored_find(rel, root), set()).update(nodes)
        return {k: frozenset(v) for k, v in out.items()}

    def split(self, rel: Optional[int], spec: SplitSpec) -> List[Optional[int]]:
        key = (rel, spec.term)
        if key in self.split_done:
            log.warning("split on %s already applied under %s", spec.term, self.path(rel))
            return []
        self.split_done.add(key)
        made = []
        for label, target in spec.branches:
            c = self.g.create_color(rel, label)
            self.g.colored_union(c, spec.condition_class, target)
            made.append(c)
        return made

    def branches(self, rel: Optional[int]) -> List[Tuple[str, int]]:
        return [("true", self.true), ("false", self.false)]

    def enode_count(self) -> int:
        return self.g.total_enode_count()

    def fill_report(self, report: RunReport) -> None:
        report.black_enodes = self.g.enode_count()
        report.colored_enodes = {
            "/".join(self.path(c)): self.g.colors[c].colored_count() for c in sorted(self.g.colors)
        }
        report.labels = ["/".join(self.path(c)) for c in sorted(self.g.colors)]
        report.total_enodes = self.enode_count()
        report.assumptions = len(self.g.colors)

    def check(self, rel: Optional[int], goal: Goal) -> bool:
        a = self.g.colored_lookup_term(rel, goal.lhs)
        b = self.g.colored_lookup_term(rel, goal.rhs)
        return a is not None and b is not None and self.find(rel, a) == self.find(rel, b)


# -- the driver ---------------------------------------------------------------


class CapExceeded(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _Guard:
    def __init__(self, limits: Limits):
        self.limits = limits
        self.start = time.perf_counter()
        self.own_trace = False
        self.mem_base = 0
        self.peak = 0
        if limits.mem_cap is not None:
            if not tracemalloc.is_tracing():
                tracemalloc.start()
                self.own_trace = True
            self.mem_base = tracemalloc.get_traced_memory()[0]

    def check(self, engine) -> None:
        lim = self.limits
        if lim.time_cap is not None and time.perf_counter() - self.start > lim.time_cap:
            raise CapExceeded("time-cap")
        if lim.mem_cap is not None:
            used = tracemalloc.get_traced_memory()[0] - self.mem_base
            self.peak = max(self.peak, used)
            if used > lim.mem_cap:
                raise CapExceeded("memory-cap")
        if lim.node_cap is not None and engine.enode_count() > lim.node_cap:
            raise CapExceeded("node-cap")

    def close(self) -> None:
        if self.own_trace:
            tracemalloc.stop()


OUTCOME = {"time-cap": "timeout", "memory-cap": "oom"}


def choose_splits(engine, blocked, limits: Limits) -> List[Tuple[object, SplitSpec]]:
    """One split per leaf relation: its least blocked condition by smallest-term order."""
    leaves = set(engine.leaves())
    per_leaf: Dict[object, set] = {}
    for rel, cls in blocked:
        if rel in leaves and engine.depth(rel) < limits.split_depth:
            per_leaf.setdefault(rel, set()).add(engine.find(rel, cls))
    chosen = []
    budget = None
    if limits.max_relations is not None:
        budget = limits.max_relations - (len(engine.relations()) - 1)
    for rel in sorted(per_leaf, key=lambda r: engine.path(r)):
        keys = extract_keys(engine.view(rel))
        cls = min(per_leaf[rel], key=lambda c: keys[engine.find(rel, c)])
        term = render_key(keys[engine.find(rel, cls)])
        branches = engine.branches(rel)
        if budget is not None:
            if budget < len(branches):
                continue
            budget -= len(branches)
        spec = SplitSpec(cls, term, [(f"{term}={name}", target) for name, target in branches])
        chosen.append((rel, spec))
    return chosen


def run_engine(
    engine,
    rules: Sequence[Rule],
    limits: Optional[Limits] = None,
    goals: Sequence[Goal] = (),
    on_iteration=None,
) -> RunReport:
    """Saturate ``engine`` under ``rules``; caps end the run with a partial report."""
    limits = limits or Limits()
    report = RunReport(mode=engine.mode)
    report.rule_applications = {r.name: 0 for r in rules}
    guard = _Guard(limits)
    engine.rebuild()
    try:
        for it in range(limits.iterations):
            guard.check(engine)
            report.iterations = it + 1
            if hasattr(engine, "g"):
                engine.g.epoch += 1
            actions, blocked = engine.read(rules)
            if actions:
                for a in actions:
                    engine.apply(a, rules)
                    if a.kind == "rewrite":
                        report.rule_applications[rules[a.rule].name] += 1
                engine.rebuild()
                if on_iteration is not None:
                    on_iteration(engine, it)
                continue
            splits = choose_splits(engine, blocked, limits) if limits.split else []
            if not splits:
                report.stop_reason = "saturated"
                break
            if report.base_enodes is None:
                report.base_enodes = engine.enode_count()
            for rel, spec in splits:
                engine.split(rel, spec)
                report.splits.append(engine.path(rel) + (spec.term,))
            engine.rebuild()
            if on_iteration is not None:
                on_iteration(engine, it)
        else:
            report.stop_reason = "iteration-cap"
    except CapExceeded as exc:
        report.stop_reason = exc.reason
        report.outcome = OUTCOME.get(exc.reason, "ok")
    finally:
        report.peak_memory = guard.peak if limits.mem_cap is not None else None
        guard.close()
    report.wall_time = time.perf_counter() - guard.start
    engine.fill_report(report)
    report.goals = [goal_verdict(engine, g) for g in goals]
    return report


def goal_verdict(engine, goal: Goal) -> dict:
    per_leaf = {"/".join(engine.path(rel)) or "black": engine.check(rel, goal) for rel in engine.leaves()}
    return {
        "goal": str(goal),
        "black": engine.check(engine.relations()[0], goal),
        "leaves": per_leaf,
        "by_cases": all(per_leaf.values()),
    }


# -- whole-graph operations on a colored e-graph ------------------------------


def new_graph() -> ColoredEGraph:
    """A colored e-graph holding the distinguished ``true`` and ``false`` classes."""
    g = ColoredEGraph()
    g.add(TRUE)
    g.add(FALSE)
    return g


def apply_rule(g: ColoredEGraph, rule: Rule, mode: str = "optimized") -> int:
    """Apply one rule over every relation; returns the number of effective applications."""
    engine = ColoredEngine(g, mode)
    engine.rebuild()
    actions, _ = engine.read([rule])
    for a in actions:
        engine.apply(a, [rule])
    engine.rebuild()
    return sum(1 for a in actions if a.kind == "rewrite")


def run(
    g: ColoredEGraph,
    rules: Sequence[Rule],
    limits: Optional[Limits] = None,
    goals: Sequence[Goal] = (),
    mode: str = "optimized",
) -> RunReport:
    return run_engine(ColoredEngine(g, mode), rules, limits, goals)


def detect_splits(g: ColoredEGraph, rules: Sequence[Rule]) -> List[Tuple[Optional[int], SplitSpec]]:
    """Blocked conditions of conditional rules, one entry per (relation, condition class)."""
    engine = ColoredEngine(g)
    engine.rebuild()
    _, blocked = engine.read(rules)
    out = []
    seen = set()
    for rel, cls in blocked:
        key = (rel, engine.find(rel, cls))
        if key in seen:
            continue
        seen.add(key)
        keys = extract_keys(engine.view(rel))
        term = render_key(keys[key[1]])
        out.append(
            (rel, SplitSpec(key[1], term, [(f"{term}={n}", t) for n, t in engine.branches(rel)]))
        )
    return out


def apply_split(g: ColoredEGraph, parent: Optional[int], spec: SplitSpec) -> List[int]:
    existing = [c for c in g.children[parent] if g.colors[c].label in {lab for lab, _ in spec.branches}]
    if existing:
        log.warning("split on %s already applied", spec.term)
        return []
    made = []
    for label, target in spec.branches:
        c = g.create_color(parent, label)
        g.colored_union(c, spec.condition_class, target)
        made.append(c)
    return made


def check_goal(g: ColoredEGraph, c: Optional[int], lhs: Term, rhs: Term) -> bool:
    a, b = g.add(lhs), g.add(rhs)
    g.rebuild_all()
    return g.colored_find(c, a) == g.colored_find(c, b)


def proved_by_cases(g: ColoredEGraph, lhs: Term, rhs: Term) -> bool:
    a, b = g.add(lhs), g.add(rhs)
    g.rebuild_all()
    return all(g.colored_find(c, a) == g.colored_find(c, b) for c in g.leaves())
