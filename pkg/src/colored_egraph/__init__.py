"""Colored e-graphs: many assumption-indexed congruences over one shared e-graph."""

from .baseline import CloneEngine, CloneSet, oracle_compare
from .colors import ColoredEGraph
from .core import EGraph
from .ematch import Match, ematch_black, ematch_colored
from .saturate import ColoredEngine, Goal, Limits, Rule, RunReport, parse_goals, parse_rules, run_engine
from .terms import App, Var, parse_pattern, parse_term
from .ufind import LayeredUnionFind, UnionFind

__all__ = [
    "App",
    "CloneEngine",
    "CloneSet",
    "ColoredEGraph",
    "ColoredEngine",
    "EGraph",
    "Goal",
    "LayeredUnionFind",
    "Limits",
    "Match",
    "Rule",
    "RunReport",
    "UnionFind",
    "Var",
    "ematch_black",
    "ematch_colored",
    "oracle_compare",
    "parse_goals",
    "parse_pattern",
    "parse_rules",
    "parse_term",
    "run_engine",
]
