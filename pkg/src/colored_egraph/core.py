"""The root ("black") e-graph: hash-cons, union-find and e-class map with deferred rebuilding."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .terms import ENode, MalformedTermError, Term, Var
from .ufind import UnionFind


@dataclass
class EClass:
    id: int
    nodes: List[ENode] = field(default_factory=list)
    # (parent e-node, class holding it)
    parents: List[Tuple[ENode, int]] = field(default_factory=list)


class EGraph:
    def __init__(self) -> None:
        self.uf = UnionFind()
        self.hashcons: Dict[ENode, int] = {}
        self.classes: Dict[int, EClass] = {}
        self.pending: List[int] = []
        self.arity: Dict[str, int] = {}
        # counts genuine black changes: a node stored or two classes merged
        self.mutations = 0

    # -- queries -------------------------------------------------------------

    def find(self, id: int) -> int:
        return self.uf.find(id)

    def check_arity(self, op: str, n: int) -> None:
        known = self.arity.setdefault(op, n)
        if known != n:
            raise MalformedTermError(f"symbol {op!r} used with arity {n}, expected {known}")

    def canonicalize(self, node: ENode) -> ENode:
        find = self.uf.find
        return ENode(node.op, tuple(find(c) for c in node.children))

    def lookup(self, node: ENode) -> Optional[int]:
        if node.op not in self.arity:
            return None
        id = self.hashcons.get(self.canonicalize(node))
        return None if id is None else self.uf.find(id)

    def lookup_term(self, term: Term) -> Optional[int]:
        kids = []
        for a in term.args:
            k = self.lookup_term(a)  # type: ignore[arg-type]
            if k is None:
                return None
            kids.append(k)
        return self.lookup(ENode(term.op, tuple(kids)))

    def class_ids(self) -> List[int]:
        return sorted(self.classes)

    def enode_count(self) -> int:
        return sum(len(c.nodes) for c in self.classes.values())

    def nodes(self, id: int) -> List[ENode]:
        return self.classes[self.uf.find(id)].nodes

    # -- mutation ------------------------------------------------------------

    def new_class(self) -> int:
        id = self.uf.make_set()
        self.classes[id] = EClass(id)
        return id

    def add_node(self, node: ENode) -> int:
        self.check_arity(node.op, len(node.children))
        node = self.canonicalize(node)
        found = self.hashcons.get(node)
        if found is not None:
            return self.uf.find(found)
        id = self.new_class()
        self.classes[id].nodes.append(node)
        for child in set(node.children):
            self.classes[child].parents.append((node, id))
        self.hashcons[node] = id
        self.mutations += 1
        return id

    def add(self, term: Term) -> int:
        """Insert ``term`` bottom-up, reusing any class that already holds a sub-term."""
        if isinstance(term, Var):
            raise MalformedTermError(f"cannot add a hole {term}")
        kids = tuple(self.add(a) for a in term.args)  # type: ignore[arg-type]
        return self.add_node(ENode(term.op, kids))

    def union(self, a: int, b: int) -> Tuple[int, bool]:
        """Merge two classes. The hash-cons stays stale until :meth:`rebuild`."""
        ra, rb = self.uf.find(a), self.uf.find(b)
        root, merged = self.uf.union(ra, rb)
        if not merged:
            return root, False
        gone = self.classes.pop(rb if root == ra else ra)
        kept = self.classes[root]
        kept.nodes.extend(gone.nodes)
        kept.parents.extend(gone.parents)
        self.pending.append(root)
        self.mutations += 1
        return root, True

    def rebuild(self) -> int:
        """Restore hash-cons canonicity and congruence closure; returns cascaded unions."""
        if not self.pending:
            return 0
        merges = 0
        touched: Set[int] = set()
        while self.pending:
            todo = sorted({self.uf.find(c) for c in self.pending})
            self.pending = []
            for cid in todo:
                merges += self._repair(cid, touched)
        self._tidy(touched)
        return merges

    def _repair(self, cid: int, touched: Set[int]) -> int:
        cid = self.uf.find(cid)
        cls = self.classes[cid]
        parents, cls.parents = cls.parents, []
        touched.add(cid)
        merges = 0
        for node, _ in parents:
            self.hashcons.pop(node, None)
        fresh: Dict[ENode, int] = {}
        for node, pcls in parents:
            node = self.canonicalize(node)
            pcls = self.uf.find(pcls)
            touched.add(pcls)
            other = fresh.get(node)
            if other is None:
                other = self.hashcons.get(node)
            if other is not None and self.uf.find(other) != pcls:
                pcls, merged = self.union(other, pcls)
                merges += merged
            fresh[node] = pcls
            self.hashcons[node] = pcls
        self.classes[self.uf.find(cid)].parents.extend(fresh.items())
        return merges

    def _tidy(self, touched: Set[int]) -> None:
        find = self.uf.find
        roots = {find(t) for t in touched}
        kids: Set[int] = set()
        for r in roots:
            cls = self.classes[r]
            cls.nodes = list(dict.fromkeys(self.canonicalize(n) for n in cls.nodes))
            for n in cls.nodes:
                kids.update(n.children)
        for k in {find(k) for k in kids} | roots:
            cls = self.classes[k]
            cls.parents = list(dict.fromkeys((self.canonicalize(n), find(p)) for n, p in cls.parents))
        for key, val in self.hashcons.items():
            if self.uf.parent[val] != val:
                self.hashcons[key] = find(val)

    # -- export --------------------------------------------------------------

    def copy(self) -> "EGraph":
        other = EGraph.__new__(EGraph)
        other.uf = self.uf.copy()
        other.hashcons = dict(self.hashcons)
        other.classes = {
            k: EClass(c.id, list(c.nodes), list(c.parents)) for k, c in self.classes.items()
        }
        other.pending = list(self.pending)
        other.arity = dict(self.arity)
        other.mutations = self.mutations
        return other

    def dump(self) -> dict:
        return {
            "classes": {
                str(cid): {
                    "nodes": [[n.op, list(n.children)] for n in cls.nodes],
                    "parents": [[n.op, list(n.children), p] for n, p in cls.parents],
                }
                for cid, cls in sorted(self.classes.items())
            },
            "union_find": list(self.uf.parent),
        }
