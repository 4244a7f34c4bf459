"""Union-find structures: a plain path-compressing master and sparse layers on top of it."""

from __future__ import annotations

from typing import Dict, Optional, Set, Tuple


class UnknownIdError(IndexError):
    """Raised when an id was never allocated."""


class UnionFind:
    """Dense union-find; the lower-numbered root always survives a union."""

    def __init__(self) -> None:
        self.parent: list[int] = []
        # bumped on every real merge, layers use it to notice stale deltas
        self.version = 0

    def __len__(self) -> int:
        return len(self.parent)

    def make_set(self) -> int:
        id = len(self.parent)
        self.parent.append(id)
        return id

    def _check(self, id: int) -> None:
        if not 0 <= id < len(self.parent):
            raise UnknownIdError(f"unknown e-class id {id}")

    def find(self, id: int) -> int:
        self._check(id)
        parent = self.parent
        root = id
        while parent[root] != root:
            root = parent[root]
        while parent[id] != root:
            parent[id], id = root, parent[id]
        return root

    def find_nocompress(self, id: int) -> int:
        self._check(id)
        while self.parent[id] != id:
            id = self.parent[id]
        return id

    def union(self, a: int, b: int) -> Tuple[int, bool]:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra, False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.version += 1
        return ra, True

    def copy(self) -> "UnionFind":
        other = UnionFind()
        other.parent = list(self.parent)
        other.version = self.version
        return other


class LayeredUnionFind:
    """A coarsening of the layer below, stored as a sparse delta over its representatives.

    The delta only holds ids that took part in a union of this layer. Keys are
    representatives of the layer below; they go stale when the lower layer merges
    and are re-normalized lazily on the next lookup.
    """

    def __init__(self, base: UnionFind, parent: Optional["LayeredUnionFind"] = None):
        self.base = base
        self.parent = parent
        self._delta: Dict[int, int] = {}
        self._version = 0
        self._seen = self._lower_stamp()

    def _lower_stamp(self) -> int:
        if self.parent is None:
            return self.base.version
        return self.parent.stamp()

    def stamp(self) -> int:
        # every counter is monotone, so the sum moves iff some layer below moved
        return self._version + self._lower_stamp()

    def lower_find(self, id: int) -> int:
        if self.parent is None:
            return self.base.find(id)
        return self.parent.find(id)

    def _dfind(self, r: int) -> int:
        delta = self._delta
        nxt = delta.get(r, r)
        while nxt != r:
            r = nxt
            nxt = delta.get(r, r)
        return r

    def _link(self, ra: int, rb: int) -> Tuple[int, bool]:
        ra, rb = self._dfind(ra), self._dfind(rb)
        if ra == rb:
            return ra, False
        if rb < ra:
            ra, rb = rb, ra
        self._delta[rb] = ra
        self._delta.setdefault(ra, ra)
        return ra, True

    def normalize(self) -> None:
        """Re-key the delta by current lower representatives if the lower layer moved."""
        stamp = self._lower_stamp()
        if stamp == self._seen:
            return
        old = self._delta
        self._delta = {}
        for k in old:
            r = k
            while old[r] != r:
                r = old[r]
            self._link(self.lower_find(k), self.lower_find(r))
        self._seen = stamp

    def find(self, id: int) -> int:
        self.normalize()
        return self._dfind(self.lower_find(id))

    def union(self, a: int, b: int) -> Tuple[int, bool]:
        self.normalize()
        root, merged = self._link(self.lower_find(a), self.lower_find(b))
        if merged:
            self._version += 1
        return root, merged

    def delta_pairs(self) -> list[Tuple[int, int]]:
        self.normalize()
        return sorted((k, self._dfind(k)) for k in self._delta if self._dfind(k) != k)

    def members(self, id: int) -> Set[int]:
        """All master roots that share ``id``'s class in this layer."""
        root = self.find(id)
        if root in self._delta:
            reps = [k for k in self._delta if self._dfind(k) == root]
        else:
            reps = [root]
        if self.parent is None:
            return set(reps)
        out: Set[int] = set()
        for r in reps:
            out |= self.parent.members(r)
        return out
