"""Seeded random scenarios replayed on both the colored e-graph and the clone set."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .baseline import CloneEngine, ScheduleMismatch, oracle_compare
from .core import EGraph
from .saturate import ColoredEngine, Limits, Rule, run_engine
from .terms import App, Pattern, Term, Var, holes

CONSTS = ("a", "b", "c", "d")
UNARY = ("f", "g")
BINARY = ("h",)
PRED = "p"

PROBES: Tuple[Pattern, ...] = (
    App("f", (Var("x"),)),
    App("h", (Var("x"), Var("y"))),
    App("h", (Var("x"), Var("x"))),
    App("p", (Var("x"),)),
    App("f", (App("g", (Var("x"),)),)),
)


@dataclass
class Scenario:
    seed: int
    rules: List[Rule]
    ops: List[tuple] = field(default_factory=list)
    limits: Limits = field(default_factory=Limits)

    def describe(self) -> str:
        lines = [f"; seed {self.seed}", *map(str, self.rules)]
        for op in self.ops:
            lines.append("; " + " ".join(map(str, op)))
        return "\n".join(lines)


def _term(rng: random.Random, depth: int) -> Term:
    if depth == 0 or rng.random() < 0.3:
        return App(rng.choice(CONSTS))
    r = rng.random()
    if r < 0.55:
        return App(rng.choice(UNARY), (_term(rng, depth - 1),))
    if r < 0.85:
        return App(rng.choice(BINARY), (_term(rng, depth - 1), _term(rng, depth - 1)))
    return App(PRED, (_term(rng, depth - 1),))


def _pattern(rng: random.Random, names: Sequence[str], depth: int) -> Pattern:
    if depth == 0 or rng.random() < 0.4:
        if names and rng.random() < 0.8:
            return Var(rng.choice(names))
        return App(rng.choice(CONSTS))
    if rng.random() < 0.6:
        return App(rng.choice(UNARY), (_pattern(rng, names, depth - 1),))
    return App(rng.choice(BINARY), (_pattern(rng, names, depth - 1), _pattern(rng, names, depth - 1)))


def _rule(rng: random.Random, i: int) -> Rule:
    kind = rng.random()
    if kind < 0.2:
        # decides a predicate, so blocked conditions sometimes resolve
        arg = _pattern(rng, ("x",), 1)
        lhs = App(PRED, (arg,))
        return Rule(f"r{i}", lhs, App(rng.choice(("true", "false"))))
    while True:
        lhs = _pattern(rng, ("x", "y"), 2)
        if isinstance(lhs, App) and lhs.args:
            break
    bound = sorted(holes(lhs))
    rhs = _pattern(rng, bound, 2)
    cond = None
    if rng.random() < 0.5 and bound:
        cond = App(PRED, (_pattern(rng, bound, 1),))
    return Rule(f"r{i}", lhs, rhs, cond)


def random_scenario(seed: int, max_nodes: int = 30, max_rules: int = 5, max_colors: int = 3) -> Scenario:
    rng = random.Random(seed)
    rules = [_rule(rng, i) for i in range(rng.randint(1, max_rules))]
    scratch = EGraph()
    for t in (App("true"), App("false")):
        scratch.add(t)
    ops: List[tuple] = []

    def fresh_term() -> Optional[Term]:
        for _ in range(10):
            t = _term(rng, rng.randint(0, 3))
            probe = scratch.copy()
            probe.add(t)
            if probe.enode_count() <= max_nodes:
                scratch.add(t)
                return t
        return None

    for _ in range(rng.randint(2, 6)):
        t = fresh_term()
        if t is not None:
            ops.append(("add", None, t))
    colors: List[Optional[int]] = []
    for _ in range(rng.randint(0, 6)):
        r = rng.random()
        if r < 0.35 and len(colors) < max_colors:
            parent = rng.choice([None, *range(len(colors))]) if colors else None
            pair = (fresh_term(), fresh_term())
            if None in pair:
                continue
            ops.append(("assume", parent, f"A{len(colors)}", [pair]))
            colors.append(parent)
        elif r < 0.5:
            pair = (fresh_term(), fresh_term())
            if None in pair:
                continue
            ops.append(("union", None, *pair))
        elif r < 0.7 and colors:
            t = fresh_term()
            if t is not None:
                ops.append(("add", rng.randrange(len(colors)), t))
        elif r < 0.85 and colors:
            pair = (fresh_term(), fresh_term())
            if None in pair:
                continue
            ops.append(("union", rng.randrange(len(colors)), *pair))
        else:
            ops.append(("run", rng.randint(1, 3)))
    ops.append(("run", rng.randint(1, 4)))
    limits = Limits(iterations=4, split_depth=2, max_relations=max_colors)
    return Scenario(seed, rules, ops, limits)


def replay(scn: Scenario, engine) -> list:
    """Apply the scenario's operations to an engine; returns the run reports."""
    rels: list = []
    root = engine.relations()[0]
    reports = []

    def rel(i):
        return root if i is None else rels[i]

    for op in scn.ops:
        kind = op[0]
        if kind == "add":
            engine.add_term(rel(op[1]), op[2])
        elif kind == "union":
            engine.union_terms(rel(op[1]), op[2], op[3])
        elif kind == "assume":
            rels.append(engine.assume(rel(op[1]), op[2], op[3]))
        elif kind == "run":
            lim = Limits(**{**scn.limits.__dict__, "iterations": op[1]})
            reports.append(run_engine(engine, scn.rules, lim))
    engine.rebuild()
    return reports


def check_scenario(scn: Scenario, colored_engine=None) -> dict:
    """Replay on both sides and diff them; ``empty`` is True when they agree."""
    col = colored_engine if colored_engine is not None else ColoredEngine()
    clones = CloneEngine()
    replay(scn, col)
    replay(scn, clones)
    probes = list(PROBES) + [r.lhs for r in scn.rules]
    try:
        return oracle_compare(clones, col, probes)
    except ScheduleMismatch as err:
        return {"empty": False, "schedule": str(err)}


def synthetic_case(seed: int, max_nodes: int = 60, max_rules: int = 6) -> Tuple[List[Rule], List[Term]]:
    """A larger random rule system for the benchmark corpus; always has a conditional rule."""
    rng = random.Random(seed)
    rules = [_rule(rng, i) for i in range(rng.randint(2, max_rules))]
    if not any(r.condition is not None for r in rules):
        lhs = App(rng.choice(UNARY), (Var("x"),))
        rules.append(Rule(f"r{len(rules)}", lhs, _pattern(rng, ("x",), 2), App(PRED, (Var("x"),))))
    scratch = EGraph()
    terms: List[Term] = []
    for _ in range(40):
        t = _term(rng, rng.randint(1, 4))
        probe = scratch.copy()
        probe.add(t)
        if probe.enode_count() > max_nodes:
            break
        scratch.add(t)
        if t not in terms:
            terms.append(t)
    return rules, terms


def render_case(rules: Sequence[Rule], terms: Sequence[Term]) -> Tuple[str, str]:
    return "\n".join(map(str, rules)) + "\n", "\n".join(map(str, terms)) + "\n"
