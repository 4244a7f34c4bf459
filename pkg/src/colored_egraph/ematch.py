"""Top-down e-matching over the black e-graph, and the forked search across colors.

The colored search walks the black e-class map once. Whenever the class being
descended into has siblings under some color, the search forks and "jumps over"
to those siblings, tagging the branch with the shallowest color in which the jump
is valid. Conclusions reached under a relation are never re-reported for its
descendants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple

from .colors import ColoredEGraph
from .core import EGraph
from .terms import App, ENode, Pattern, Var, parse_pattern

Subst = Dict[str, int]


@dataclass(frozen=True, order=True)
class Match:
    color: Optional[int]
    root: int
    subst: Tuple[Tuple[str, int], ...]

    @classmethod
    def make(cls, color: Optional[int], root: int, subst: Subst) -> "Match":
        return cls(color, root, tuple(sorted(subst.items())))

    def as_dict(self) -> Subst:
        return dict(self.subst)

    def sort_key(self) -> tuple:
        return (-1 if self.color is None else self.color, self.root, self.subst)


__all__ = [
    "Match",
    "parse_pattern",
    "ematch_black",
    "ematch_colored",
    "canonicalize_match",
    "dedup_matches",
]


# -- black ---------------------------------------------------------------------


def _black_search(g: EGraph, p: Pattern, cid: int, subst: Subst) -> Iterator[Subst]:
    cid = g.find(cid)
    if isinstance(p, Var):
        bound = subst.get(p.name)
        if bound is None:
            yield {**subst, p.name: cid}
        elif g.find(bound) == cid:
            yield subst
        return
    arity = len(p.args)
    for node in g.classes[cid].nodes:
        if node.op == p.op and len(node.children) == arity:
            yield from _black_args(g, p.args, node.children, 0, subst)


def _black_args(g: EGraph, pats, kids, i: int, subst: Subst) -> Iterator[Subst]:
    if i == len(pats):
        yield subst
        return
    for s in _black_search(g, pats[i], kids[i], subst):
        yield from _black_args(g, pats, kids, i + 1, s)


def ematch_black(g: EGraph, p: Pattern) -> List[Match]:
    """Every (root, substitution) for which ``p`` is represented under the black relation."""
    if isinstance(p, App) and p.op not in g.arity:
        return []
    find = g.find
    found: Set[Match] = set()
    for root in sorted(g.classes):
        if not g.classes[root].nodes:
            continue
        for s in _black_search(g, p, root, {}):
            found.add(Match.make(None, root, {k: find(v) for k, v in s.items()}))
    return sorted(found)


# -- colored -------------------------------------------------------------------


class _Snapshot:
    """Per-call tables so the forked search never touches the graph's union-finds."""

    def __init__(self, g: ColoredEGraph):
        self.g = g
        roots = sorted(g.classes)
        self.children = {k: sorted(v) for k, v in g.children.items()}
        self.croot: Dict[Optional[int], Dict[int, int]] = {None: {r: r for r in roots}}
        self.members: Dict[Optional[int], Dict[int, List[int]]] = {None: {r: [r] for r in roots}}
        self.lineage: Dict[Optional[int], Set[Optional[int]]] = {None: {None}}
        for c in sorted(g.colors):
            find = g.colors[c].luf.find
            cr = {r: find(r) for r in roots}
            mem: Dict[int, List[int]] = {}
            for r in roots:
                mem.setdefault(cr[r], []).append(r)
            self.croot[c] = cr
            self.members[c] = mem
            self.lineage[c] = set(g.ancestors(c)) | {None}
        self.subtree: Dict[Optional[int], List[Optional[int]]] = {
            rel: [rel, *g.descendants(rel)] for rel in [None, *sorted(g.colors)]
        }
        self.nodes_at: Dict[int, List[Tuple[Optional[int], ENode]]] = {}
        for r in roots:
            self.nodes_at[r] = [(None, n) for n in g.classes[r].nodes]
        for c in sorted(g.colors):
            for h, nodes in g.colors[c].colored_nodes.items():
                self.nodes_at.setdefault(g.find(h), []).extend((c, n) for n in nodes)

    def same(self, s: Optional[int], a: int, b: int) -> bool:
        cr = self.croot[s]
        return cr[a] == cr[b]

    def related(self, owner: Optional[int], rel: Optional[int]) -> bool:
        return owner in self.lineage[rel] or rel in self.lineage[owner]

    def minimal(self, rel: Optional[int], ok: Callable[[Optional[int]], bool]) -> List[Optional[int]]:
        """Shallowest relations at or below ``rel`` satisfying the (upward-closed) test."""
        if ok(rel):
            return [rel]
        out: List[Optional[int]] = []
        for child in self.children[rel]:
            out.extend(self.minimal(child, ok))
        return out


def _colored_search(
    snap: _Snapshot,
    p: Pattern,
    x: int,
    rel: Optional[int],
    subst: Subst,
    top: bool,
    trace: Optional[list],
    path: tuple = (),
) -> Iterator[Tuple[Optional[int], Subst, tuple]]:
    """Yields (relation, substitution, path); ``path`` is only grown when tracing."""
    x = snap.g.find(x)
    if isinstance(p, Var):
        bound = subst.get(p.name)
        if bound is None:
            yield rel, {**subst, p.name: x}, path
        else:
            for s in snap.minimal(rel, lambda s: snap.same(s, bound, x)):
                yield s, subst, path
        return
    if trace is not None:
        trace.append((path, id(p), x, rel))
    if top:
        ys = [x]
    else:
        seen: Set[int] = set()
        for s in snap.subtree[rel]:
            seen.update(snap.members[s][snap.croot[s][x]])
        ys = sorted(seen)
    arity = len(p.args)
    for y in ys:
        for owner, node in snap.nodes_at.get(y, ()):
            if node.op != p.op or len(node.children) != arity:
                continue
            if not snap.related(owner, rel):
                continue

            def ok(s: Optional[int], y=y, owner=owner) -> bool:
                return owner in snap.lineage[s] and snap.same(s, x, y)

            for s in snap.minimal(rel, ok):
                step = path + ((id(p), y, owner, node, s),) if trace is not None else path
                yield from _colored_args(snap, p.args, node.children, 0, s, subst, trace, step)


def _colored_args(snap, pats, kids, i, rel, subst, trace, path):
    if i == len(pats):
        yield rel, subst, path
        return
    for s, sub, step in _colored_search(snap, pats[i], kids[i], rel, subst, False, trace, path):
        yield from _colored_args(snap, pats, kids, i + 1, s, sub, trace, step)


def canonicalize_match(g: EGraph, m: Match) -> Match:
    """Replace root and substitution by representatives of the match's relation."""
    if m.color is None:
        find = g.find
    else:
        find = g.colors[m.color].luf.find  # type: ignore[attr-defined]
    return Match(m.color, find(m.root), tuple((k, find(v)) for k, v in m.subst))


def dedup_matches(g: ColoredEGraph, raw: List[Match]) -> List[Match]:
    """Canonicalize per relation and drop matches an ancestor relation already has."""
    by_rel: Dict[Optional[int], List[Match]] = {}
    for m in raw:
        by_rel.setdefault(m.color, []).append(m)
    out: List[Match] = []
    for rel in [None, *sorted(g.colors)]:
        mine = by_rel.get(rel)
        if not mine:
            continue
        inherited: Set[Match] = set()
        if rel is not None:
            for a in g.ancestors(rel)[1:] + [None]:
                for m in by_rel.get(a, ()):
                    inherited.add(canonicalize_match(g, Match(rel, m.root, m.subst)))
        kept: Set[Match] = set()
        for m in mine:
            cm = canonicalize_match(g, m)
            if cm not in inherited:
                kept.add(cm)
        out.extend(sorted(kept))
    return out


def ematch_colored(
    g: ColoredEGraph,
    p: Pattern,
    *,
    dedup: bool = True,
    trace: Optional[list] = None,
    snapshot: Optional[_Snapshot] = None,
) -> List[Match]:
    """Black matches plus, per color, the matches that only hold under that color."""
    if isinstance(p, App) and p.op not in g.arity:
        return []
    snap = snapshot or _Snapshot(g)
    raw: List[Match] = []
    for root in sorted(g.classes):
        here = snap.nodes_at.get(root)
        if not here:
            continue
        if isinstance(p, Var):
            # a bare hole matches wherever the class is visible
            owners = {owner for owner, _ in here}
            for rel in [None] if None in owners else sorted(owners):
                raw.append(Match.make(rel, root, {p.name: root}))
            continue
        for rel, s, _ in _colored_search(snap, p, root, None, {}, True, trace):
            raw.append(Match.make(rel, root, s))
    if not dedup:
        return raw
    return dedup_matches(g, raw)


def snapshot(g: ColoredEGraph) -> _Snapshot:
    return _Snapshot(g)
