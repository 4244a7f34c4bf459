"""Colored e-graphs: several coarsened congruences layered over one shared black e-graph.

Each color owns a sparse layered union-find, the e-nodes only it (and its
descendants) can see, and a colored hash-cons canonical under its own relation.
Colored e-nodes live in *holder* classes: black classes without black e-nodes,
so black matching and black congruence never see them.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple

from .core import EGraph
from .terms import ENode, MalformedTermError, Term, Var
from .ufind import LayeredUnionFind


class UnknownColorError(KeyError):
    pass


@dataclass
class Color:
    id: int
    parent: Optional[int]
    label: str
    luf: LayeredUnionFind
    depth: int
    # holder black root -> colored e-nodes stored there
    colored_nodes: Dict[int, List[ENode]] = field(default_factory=dict)
    # black root of a child -> (colored e-node, holder) pairs mentioning it
    colored_parents: Dict[int, List[Tuple[ENode, int]]] = field(default_factory=dict)
    # color-canonical e-node -> class, covering every e-node visible to the color
    hashcons: Dict[ENode, int] = field(default_factory=dict)
    mutations: int = 0
    clean_stamp: Optional[tuple] = None
    hashcons_passes: int = 0

    def colored_count(self) -> int:
        return sum(len(v) for v in self.colored_nodes.values())


@dataclass
class ColoredClassView:
    color: Optional[int]
    representative: int
    members: Set[int]
    nodes: List[ENode]


@dataclass
class StoreEvent:
    """One colored e-node stored by :meth:`ColoredEGraph.colored_add` (audit mode)."""

    color: int
    node: ENode  # color-canonical at insert time
    epoch: int
    subsumed: bool  # black or an ancestor already had it
    duplicate: bool  # the color itself already stored it


class ColoredEGraph(EGraph):
    def __init__(self) -> None:
        super().__init__()
        self.colors: Dict[int, Color] = {}
        self.children: Dict[Optional[int], List[int]] = {None: []}
        # audit instrumentation for duplicate-insertion checks
        self.audit = False
        self.epoch = 0
        self.store_log: List[StoreEvent] = []

    # -- color management ----------------------------------------------------

    def color(self, c: int) -> Color:
        try:
            return self.colors[c]
        except KeyError:
            raise UnknownColorError(f"unknown color {c}") from None

    def create_color(self, parent: Optional[int] = None, label: str = "") -> int:
        if parent is not None:
            pc = self.color(parent)
            luf = LayeredUnionFind(self.uf, pc.luf)
            depth = pc.depth + 1
        else:
            luf = LayeredUnionFind(self.uf)
            depth = 1
        cid = len(self.colors)
        self.colors[cid] = Color(cid, parent, label or f"color{cid}", luf, depth)
        self.children[cid] = []
        self.children[parent].append(cid)
        return cid

    def ancestors(self, c: int) -> List[int]:
        """``c`` and its ancestors, nearest first."""
        out = []
        cur: Optional[int] = c
        while cur is not None:
            out.append(cur)
            cur = self.color(cur).parent
        return out

    def descendants(self, c: Optional[int]) -> List[int]:
        """Strict descendants of ``c`` (``None`` = black) in creation order."""
        out: List[int] = []
        stack = list(self.children[c])
        while stack:
            d = stack.pop()
            out.append(d)
            stack.extend(self.children[d])
        return sorted(out)

    def is_ancestor(self, a: Optional[int], c: Optional[int]) -> bool:
        """True when relation ``a`` is ``c`` or one of its ancestors (black is everyone's)."""
        if a is None:
            return True
        return c is not None and a in self.ancestors(c)

    def leaves(self) -> List[Optional[int]]:
        if not self.colors:
            return [None]
        return [c for c in sorted(self.colors) if not self.children[c]]

    # -- colored union-find --------------------------------------------------

    def colored_find(self, c: Optional[int], id: int) -> int:
        if c is None:
            return self.uf.find(id)
        return self.color(c).luf.find(id)

    def colored_union(self, c: int, a: int, b: int) -> Tuple[int, bool]:
        color = self.color(c)
        root, merged = color.luf.union(a, b)
        if merged:
            color.mutations += 1
        return root, merged

    def siblings(self, c: Optional[int], id: int) -> Set[int]:
        if c is None:
            return {self.uf.find(id)}
        return self.color(c).luf.members(id)

    def colored_canonicalize(self, c: Optional[int], node: ENode) -> ENode:
        if c is None:
            return self.canonicalize(node)
        find = self.color(c).luf.find
        return ENode(node.op, tuple(find(ch) for ch in node.children))

    # -- visibility ----------------------------------------------------------

    def visible_nodes(self, c: Optional[int], root: int) -> Iterator[Tuple[Optional[int], ENode]]:
        """(owner, e-node) pairs stored at black class ``root`` that color ``c`` can see."""
        cls = self.classes.get(root)
        if cls is not None:
            for n in cls.nodes:
                yield None, n
        if c is None:
            return
        for a in reversed(self.ancestors(c)):
            for n in self.colors[a].colored_nodes.get(root, ()):
                yield a, n

    def visible_parents(self, c: int, root: int) -> Iterator[Tuple[ENode, int]]:
        cls = self.classes.get(root)
        if cls is not None:
            yield from cls.parents
        for a in self.ancestors(c):
            yield from self.colors[a].colored_parents.get(root, ())

    def colored_class(self, c: Optional[int], id: int) -> ColoredClassView:
        members = self.siblings(c, id)
        nodes = []
        for m in sorted(members):
            nodes.extend(n for _, n in self.visible_nodes(c, m))
        return ColoredClassView(c, self.colored_find(c, id), members, nodes)

    def colored_enode_count(self) -> int:
        return sum(col.colored_count() for col in self.colors.values())

    def total_enode_count(self) -> int:
        return self.enode_count() + self.colored_enode_count()

    # -- colored insertion ---------------------------------------------------

    def colored_lookup(self, c: Optional[int], node: ENode) -> Optional[int]:
        """Class of ``node`` under ``c`` if some visible e-node already represents it."""
        if node.op not in self.arity:
            return None
        if c is not None:
            for a in self.ancestors(c):
                col = self.colors[a]
                hit = col.hashcons.get(self.colored_canonicalize(a, node))
                if hit is not None:
                    return self.uf.find(hit)
        return self.lookup(node)

    def colored_lookup_term(self, c: Optional[int], term: Term) -> Optional[int]:
        kids = []
        for a in term.args:
            k = self.colored_lookup_term(c, a)  # type: ignore[arg-type]
            if k is None:
                return None
            kids.append(k)
        return self.colored_lookup(c, ENode(term.op, tuple(kids)))

    def colored_add(self, c: int, node: ENode) -> int:
        """Insert an e-node that only color ``c`` (and its descendants) may see."""
        color = self.color(c)
        self.check_arity(node.op, len(node.children))
        found = self.colored_lookup(c, node)
        if found is not None:
            return found
        node = self.colored_canonicalize(c, node)
        if self.audit:
            subsumed, duplicate = self._subsumed_scan(c, node)
            self.store_log.append(StoreEvent(c, node, self.epoch, subsumed, duplicate))
        holder = self.new_class()
        color.colored_nodes[holder] = [node]
        for child in set(node.children):
            color.colored_parents.setdefault(child, []).append((node, holder))
        color.hashcons[node] = holder
        color.mutations += 1
        return holder

    def colored_add_term(self, c: int, term: Term) -> int:
        if isinstance(term, Var):
            raise MalformedTermError(f"cannot add a hole {term}")
        kids = tuple(self.colored_add_term(c, a) for a in term.args)  # type: ignore[arg-type]
        return self.colored_add(c, ENode(term.op, kids))

    def _subsumed_scan(self, c: int, node: ENode) -> Tuple[bool, bool]:
        # from scratch: which visible e-nodes already have this canonical form?
        canon = self.colored_canonicalize(c, node)
        subsumed = duplicate = False
        for root in self.classes:
            for owner, n in self.visible_nodes(c, root):
                if self.colored_canonicalize(c, n) == canon:
                    if owner == c:
                        duplicate = True
                    else:
                        subsumed = True
        return subsumed, duplicate

    # -- colored rebuild -----------------------------------------------------

    def _stamp(self, c: int) -> tuple:
        return (self.mutations, tuple(self.colors[a].mutations for a in self.ancestors(c)))

    def is_dirty(self, c: int) -> bool:
        return self.color(c).clean_stamp != self._stamp(c)

    def _rekey(self, color: Color) -> None:
        # holders and children are keyed by black roots; follow black merges
        find = self.uf.find
        if any(find(k) != k for k in color.colored_nodes):
            moved: Dict[int, List[ENode]] = {}
            for k, v in color.colored_nodes.items():
                moved.setdefault(find(k), []).extend(v)
            color.colored_nodes = moved
        self._reindex_parents(color)

    def _reindex_parents(self, color: Color) -> None:
        find = self.uf.find
        parents: Dict[int, List[Tuple[ENode, int]]] = {}
        for holder, nodes in color.colored_nodes.items():
            for n in nodes:
                for ch in set(n.children):
                    parents.setdefault(find(ch), []).append((n, holder))
        color.colored_parents = parents

    def build_colored_hashcons(self, c: int) -> Tuple[Dict[ENode, int], List[int]]:
        """From-scratch colored hash-cons over every visible e-node (no mutation).

        Returns the table and the list of (class, class) collisions found, which a
        rebuild turns into colored unions.
        """
        find = self.color(c).luf.find
        table: Dict[ENode, int] = {}
        clashes = []
        for root in sorted(self.classes):
            for _, n in self.visible_nodes(c, root):
                key = ENode(n.op, tuple(find(ch) for ch in n.children))
                cls = find(root)
                prev = table.get(key)
                if prev is None:
                    table[key] = cls
                elif find(prev) != cls:
                    clashes.append((prev, cls))
        return table, clashes

    def colored_rebuild(self, c: int) -> int:
        """Bring color ``c`` to its congruence fixpoint; returns colored unions performed."""
        color = self.color(c)
        self.rebuild()
        if color.parent is not None:
            self.colored_rebuild(color.parent)
        if not self.is_dirty(c):
            return 0
        self._rekey(color)
        color.luf.normalize()
        luf = color.luf
        find = luf.find
        color.hashcons_passes += 1
        merges = 0
        # members index per colored root, kept current as colored unions happen
        members: Dict[int, List[int]] = defaultdict(list)
        for root in sorted(self.classes):
            members[find(root)].append(root)
        table: Dict[ENode, int] = {}
        worklist: List[int] = []

        def merge(a: int, b: int) -> None:
            nonlocal merges
            ra, rb = find(a), find(b)
            root, merged = luf.union(ra, rb)
            if merged:
                merges += 1
                color.mutations += 1
                gone = rb if root == ra else ra
                members[root].extend(members.pop(gone, [gone]))
                worklist.append(root)

        for root in sorted(self.classes):
            for _, n in self.visible_nodes(c, root):
                key = ENode(n.op, tuple(find(ch) for ch in n.children))
                prev = table.get(key)
                if prev is None:
                    table[key] = root
                elif find(prev) != find(root):
                    merge(prev, root)
        while worklist:
            todo = sorted({find(r) for r in worklist})
            worklist = []
            for croot in todo:
                for m in list(members.get(find(croot), ())):
                    for pnode, pcls in self.visible_parents(c, m):
                        key = ENode(pnode.op, tuple(find(ch) for ch in pnode.children))
                        prev = table.get(key)
                        if prev is not None and find(prev) != find(pcls):
                            merge(prev, pcls)
                        table[key] = pcls
        color.hashcons = {
            ENode(k.op, tuple(find(ch) for ch in k.children)): find(v) for k, v in table.items()
        }
        self.prune(c)
        self.colored_minimize(c)
        color.clean_stamp = self._stamp(c)
        return merges

    def rebuild_all(self) -> int:
        merges = self.rebuild()
        for c in sorted(self.colors):
            merges += self.colored_rebuild(c)
        return merges

    # -- pruning and minimization --------------------------------------------

    def prune(self, c: int) -> int:
        """Drop colored e-nodes of ``c`` whose canonical form another visible e-node already has."""
        color = self.color(c)
        find = color.luf.find
        seen: Set[ENode] = set()
        for cls in self.classes.values():
            for n in cls.nodes:
                seen.add(ENode(n.op, tuple(find(ch) for ch in n.children)))
        for a in self.ancestors(c)[1:]:
            for nodes in self.colors[a].colored_nodes.values():
                for n in nodes:
                    seen.add(ENode(n.op, tuple(find(ch) for ch in n.children)))
        removed = 0
        kept: Dict[int, List[ENode]] = {}
        for holder in sorted(color.colored_nodes):
            keep = []
            for n in color.colored_nodes[holder]:
                key = ENode(n.op, tuple(find(ch) for ch in n.children))
                if key in seen:
                    removed += 1
                else:
                    seen.add(key)
                    keep.append(key)
            if keep:
                kept[holder] = keep
        color.colored_nodes = kept
        self._reindex_parents(color)
        return removed

    def _is_pure_holder(self, c: int, root: int) -> bool:
        cls = self.classes.get(root)
        if cls is None or cls.nodes:
            return False
        return not any(
            root in col.colored_nodes for cid, col in self.colors.items() if cid != c
        )

    def colored_minimize(self, c: int) -> int:
        """Fold holder classes of ``c`` that are ``c``-equal into a single holder."""
        color = self.color(c)
        groups: Dict[int, List[int]] = defaultdict(list)
        for holder in sorted(color.colored_nodes):
            if self._is_pure_holder(c, holder):
                groups[color.luf.find(holder)].append(holder)
        merged = 0
        for hs in groups.values():
            target = hs[0]
            for h in hs[1:]:
                color.colored_nodes[target].extend(color.colored_nodes.pop(h))
                merged += 1
        if merged:
            self._reindex_parents(color)
        return merged

    def holder_classes(self, c: int) -> Dict[int, List[int]]:
        """Colored root -> black classes holding colored e-nodes of ``c``."""
        out: Dict[int, List[int]] = defaultdict(list)
        for holder in sorted(self.color(c).colored_nodes):
            out[self.colored_find(c, holder)].append(holder)
        return dict(out)

    # -- export --------------------------------------------------------------

    def dump(self) -> dict:
        out = super().dump()
        out["colors"] = {
            str(cid): {
                "parent": col.parent,
                "label": col.label,
                "delta": [list(p) for p in col.luf.delta_pairs()],
                "colored_nodes": {
                    str(h): [[n.op, list(n.children)] for n in nodes]
                    for h, nodes in sorted(col.colored_nodes.items())
                },
            }
            for cid, col in sorted(self.colors.items())
        }
        return out
