"""Clone semantics: one separate e-graph per assumption set.

This is both the correctness oracle for colored e-graphs and the
"separate e-graphs" arm of the benchmarks. A black operation goes to every
clone; an operation under an assumption goes to that clone and the clones
forked from it.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .colors import ColoredEGraph
from .core import EGraph
from .ematch import Match, canonicalize_match, ematch_black, ematch_colored
from .saturate import (
    FALSE,
    TRUE,
    Action,
    Goal,
    Path,
    RunReport,
    Rule,
    SplitSpec,
    View,
    ColoredEngine,
)
from .terms import ENode, Pattern, Term, Var

log = logging.getLogger(__name__)


class UnknownPathError(KeyError):
    pass


class ScheduleMismatch(ValueError):
    """The two sides did not run the same schedule, so comparing them is meaningless."""


@dataclass
class CloneSet:
    root: EGraph = field(default_factory=EGraph)
    clones: Dict[Path, EGraph] = field(default_factory=dict)

    def graph(self, path: Path) -> EGraph:
        path = tuple(path)
        if not path:
            return self.root
        try:
            return self.clones[path]
        except KeyError:
            raise UnknownPathError(f"no clone at {path!r}") from None

    def paths(self) -> List[Path]:
        return [(), *self.clones]

    def children(self, path: Path) -> List[Path]:
        return [p for p in self.clones if len(p) == len(path) + 1 and p[: len(path)] == tuple(path)]

    def below(self, path: Path) -> List[Path]:
        """``path`` and every clone forked from it, transitively."""
        n = len(path)
        return [p for p in self.paths() if p[:n] == tuple(path)]

    def leaves(self) -> List[Path]:
        return [p for p in self.paths() if not self.children(p)]

    def fork(self, parent: Path, spec: SplitSpec) -> List[Path]:
        """Copy the parent once per branch and assert the branch in the copy."""
        base = self.graph(parent)
        made = []
        for label, target in spec.branches:
            path = tuple(parent) + (label,)
            if path in self.clones:
                log.warning("clone %s already exists", path)
                continue
            clone = base.copy()
            clone.union(spec.condition_class, target)
            clone.rebuild()
            self.clones[path] = clone
            made.append(path)
        return made

    def leaf_count(self) -> int:
        return len(self.leaves())


def count_enodes(x: Union[CloneSet, EGraph]) -> int:
    """Size metric: all clones summed, or black plus every color's colored e-nodes."""
    if isinstance(x, CloneSet):
        return sum(g.enode_count() for g in [x.root, *x.clones.values()])
    if isinstance(x, ColoredEGraph):
        return x.total_enode_count()
    return x.enode_count()


class CloneEngine:
    """Runs the shared saturation driver over a :class:`CloneSet`; relations are paths."""

    mode = "separate"

    def __init__(self, cs: Optional[CloneSet] = None):
        self.cs = cs if cs is not None else CloneSet()
        self.true = self.cs.root.add(TRUE)
        self.false = self.cs.root.add(FALSE)
        for g in self.cs.clones.values():
            g.add(TRUE)
            g.add(FALSE)

    def relations(self) -> List[Path]:
        return self.cs.paths()

    def path(self, rel: Path) -> Path:
        return tuple(rel)

    def rel_of(self, path: Path) -> Path:
        self.cs.graph(path)
        return tuple(path)

    def leaves(self) -> List[Path]:
        return self.cs.leaves()

    def depth(self, rel: Path) -> int:
        return len(rel)

    def find(self, rel: Path, id: int) -> int:
        return self.cs.graph(rel).find(id)

    def add_term(self, rel: Path, term: Term) -> int:
        ids = [self.cs.graph(p).add(term) for p in self.cs.below(rel)]
        return ids[0]

    def union_terms(self, rel: Path, a: Term, b: Term) -> None:
        self.add_term((), a)
        self.add_term((), b)
        for p in self.cs.below(rel):
            g = self.cs.graph(p)
            g.union(g.add(a), g.add(b))

    def assume(self, parent: Path, label: str, pairs: Iterable[Tuple[Term, Term]]) -> Path:
        pairs = list(pairs)
        for a, b in pairs:
            self.add_term((), a)
            self.add_term((), b)
        path = tuple(parent) + (label,)
        clone = self.cs.graph(parent).copy()
        for a, b in pairs:
            clone.union(clone.add(a), clone.add(b))
        clone.rebuild()
        self.cs.clones[path] = clone
        return path

    def rebuild(self) -> None:
        for p in self.cs.paths():
            self.cs.graph(p).rebuild()

    def _lookup(self, g: EGraph, p: Pattern, subst) -> Optional[int]:
        if isinstance(p, Var):
            return subst[p.name]
        kids = []
        for a in p.args:
            k = self._lookup(g, a, subst)
            if k is None:
                return None
            kids.append(k)
        return g.lookup(ENode(p.op, tuple(kids)))

    def _instantiate(self, g: EGraph, p: Pattern, subst) -> int:
        if isinstance(p, Var):
            return subst[p.name]
        return g.add_node(ENode(p.op, tuple(self._instantiate(g, a, subst) for a in p.args)))

    def read(self, rules: Sequence[Rule]):
        actions: List[Action] = []
        blocked: List[Tuple[Path, int]] = []
        for path in self.cs.paths():
            g = self.cs.graph(path)
            t, f = g.find(self.true), g.find(self.false)
            for ri, rule in enumerate(rules):
                for m in ematch_black(g, rule.lhs):
                    subst = m.as_dict()
                    if rule.condition is not None:
                        cls = self._lookup(g, rule.condition, subst)
                        if cls is None:
                            actions.append(Action(path, ri, "condition", m.root, m.subst))
                            continue
                        cls = g.find(cls)
                        if cls != t:
                            if cls != f:
                                blocked.append((path, cls))
                            continue
                    rhs = self._lookup(g, rule.rhs, subst)
                    if rhs is None or g.find(rhs) != g.find(m.root):
                        actions.append(Action(path, ri, "rewrite", m.root, m.subst))
        return actions, blocked

    def apply(self, action: Action, rules: Sequence[Rule]) -> None:
        g = self.cs.graph(action.rel)
        rule = rules[action.rule]
        subst = dict(action.subst)
        if action.kind == "condition":
            self._instantiate(g, rule.condition, subst)  # type: ignore[arg-type]
        else:
            g.union(action.root, self._instantiate(g, rule.rhs, subst))

    def view(self, rel: Path) -> View:
        g = self.cs.graph(rel)
        return {cid: frozenset(c.nodes) for cid, c in g.classes.items() if c.nodes}

    def branches(self, rel: Path) -> List[Tuple[str, int]]:
        return [("true", self.true), ("false", self.false)]

    def split(self, rel: Path, spec: SplitSpec) -> List[Path]:
        return self.cs.fork(rel, spec)

    def enode_count(self) -> int:
        return count_enodes(self.cs)

    def fill_report(self, report: RunReport) -> None:
        report.black_enodes = self.cs.root.enode_count()
        report.colored_enodes = {"/".join(p): g.enode_count() for p, g in self.cs.clones.items()}
        report.labels = ["/".join(p) for p in self.cs.clones]
        report.total_enodes = self.enode_count()
        report.assumptions = len(self.cs.clones)

    def check(self, rel: Path, goal: Goal) -> bool:
        g = self.cs.graph(rel)
        a, b = g.lookup_term(goal.lhs), g.lookup_term(goal.rhs)
        return a is not None and b is not None and g.find(a) == g.find(b)


def fork(cs: CloneSet, parent: Path, spec: SplitSpec) -> List[Path]:
    return cs.fork(parent, spec)


# -- oracle comparison --------------------------------------------------------


def correspond(a: View, b: View) -> Set[Tuple[int, int]]:
    """Pairs of classes (one per view) that represent at least one common term.

    Least fixpoint of: f(a1..an) in A, f(b1..bn) in B and every (ai, bi) paired.
    """
    index: Dict[Tuple[str, int], List[Tuple[int, ENode]]] = defaultdict(list)
    for cls, nodes in b.items():
        for n in nodes:
            index[n.op, len(n.children)].append((cls, n))
    uses: Dict[int, List[Tuple[int, ENode]]] = defaultdict(list)
    for cls, nodes in a.items():
        for n in nodes:
            for ch in set(n.children):
                uses[ch].append((cls, n))
    pairs: Set[Tuple[int, int]] = set()
    by_a: Dict[int, Set[int]] = defaultdict(set)
    work: List[Tuple[int, ENode]] = [(cls, n) for cls, nodes in a.items() for n in nodes if not n.children]
    queued = set(work)
    while work:
        cls, n = work.pop()
        queued.discard((cls, n))
        for bcls, m in index.get((n.op, len(n.children)), ()):
            if (cls, bcls) in pairs:
                continue
            if all(y in by_a.get(x, ()) for x, y in zip(n.children, m.children)):
                pairs.add((cls, bcls))
                by_a[cls].add(bcls)
                for item in uses.get(cls, ()):
                    if item not in queued:
                        queued.add(item)
                        work.append(item)
    return pairs


def compare_views(a: View, b: View) -> dict:
    pairs = correspond(a, b)
    fwd: Dict[int, Set[int]] = defaultdict(set)
    bwd: Dict[int, Set[int]] = defaultdict(set)
    for x, y in pairs:
        fwd[x].add(y)
        bwd[y].add(x)
    diff: dict = {
        "colored_coarser": sorted([x, sorted(ys)] for x, ys in fwd.items() if len(ys) > 1),
        "clone_coarser": sorted([y, sorted(xs)] for y, xs in bwd.items() if len(xs) > 1),
        "only_colored": sorted(x for x in a if x not in fwd),
        "only_clone": sorted(y for y in b if y not in bwd),
        "nodes": [],
    }
    phi = {x: next(iter(ys)) for x, ys in fwd.items() if len(ys) == 1}
    for x, y in sorted(phi.items()):
        mapped = set()
        for n in a[x]:
            if all(ch in phi for ch in n.children):
                mapped.add(ENode(n.op, tuple(phi[ch] for ch in n.children)))
            else:
                mapped.add(None)
        if mapped != set(b[y]):
            diff["nodes"].append([x, y])
    diff["phi"] = phi
    return diff


DEFAULT_PROBES = ()


def _colored_match_set(g: ColoredEGraph, matches: List[Match], rel: Optional[int]) -> Set[tuple]:
    lineage = {None} if rel is None else {None, *g.ancestors(rel)}
    out = set()
    for m in matches:
        if m.color in lineage:
            cm = canonicalize_match(g, Match(rel, m.root, m.subst))
            out.add((cm.root, cm.subst))
    return out


def oracle_compare(
    cs_engine: CloneEngine,
    col_engine: ColoredEngine,
    probes: Sequence[Pattern] = DEFAULT_PROBES,
) -> dict:
    """Per relation: term partitions, e-node sets and probe matches of both sides."""
    paths_c = sorted(col_engine.path(r) for r in col_engine.relations())
    paths_s = sorted(cs_engine.relations())
    if paths_c != paths_s:
        raise ScheduleMismatch(f"relations differ: {paths_c} vs {paths_s}")
    col_engine.rebuild()
    cs_engine.rebuild()
    g = col_engine.g
    colored_matches = [ematch_colored(g, p) for p in probes]
    report: dict = {"relations": {}, "empty": True}
    for path in paths_c:
        rel = col_engine.rel_of(path)
        d = compare_views(col_engine.view(rel), cs_engine.view(path))
        phi = d.pop("phi")
        clone = cs_engine.cs.graph(path)
        bad_probes = []
        for p, ms in zip(probes, colored_matches):
            mine = set()
            for root, subst in _colored_match_set(g, ms, rel):
                if root in phi and all(v in phi for _, v in subst):
                    mine.add((phi[root], tuple((k, phi[v]) for k, v in subst)))
                else:
                    mine.add(("unmapped", root, subst))
            theirs = {(m.root, m.subst) for m in ematch_black(clone, p)}
            if mine != theirs:
                bad_probes.append(str(p))
        d["matches"] = bad_probes
        nonempty = any(d[k] for k in d)
        if nonempty:
            report["empty"] = False
        report["relations"]["/".join(path) or "black"] = d
    return report
