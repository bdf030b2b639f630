"""Rooted trees stored as parent arrays, with preorder subtree slices."""

from __future__ import annotations

from functools import cached_property

import numpy as np


class Tree:
    """A rooted tree on vertices ``0..n-1``.

    ``parent[root] == -1``.  Children are kept in increasing id order and the
    preorder visits them in that order, so the subtree of ``v`` is the
    contiguous slice ``order[pos[v] : pos[v] + size[v]]``.
    """

    def __init__(self, parent, labels=None):
        parent = np.asarray(parent, dtype=np.int64)
        n = len(parent)
        if n == 0:
            raise ValueError("empty tree")
        roots = np.flatnonzero(parent < 0)
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        self.parent = parent
        self.root = int(roots[0])
        self.labels = labels
        kids = [[] for _ in range(n)]
        for v in range(n):
            p = parent[v]
            if p >= 0:
                kids[p].append(v)
        self.children = kids
        order, depth = [], np.zeros(n, dtype=np.int64)
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            for c in reversed(kids[v]):
                depth[c] = depth[v] + 1
                stack.append(c)
        if len(order) != n:
            raise ValueError("parent array contains a cycle or unreachable vertices")
        self.order = np.array(order, dtype=np.int64)
        self.depth = depth
        pos = np.empty(n, dtype=np.int64)
        pos[self.order] = np.arange(n)
        self.pos = pos
        size = np.ones(n, dtype=np.int64)
        for v in self.order[::-1]:
            p = parent[v]
            if p >= 0:
                size[p] += size[v]
        self.size = size

    def __len__(self):
        return len(self.parent)

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def max_children(self) -> int:
        return max(len(c) for c in self.children)

    def subtree(self, v: int) -> np.ndarray:
        a = self.pos[v]
        return self.order[a:a + self.size[v]]

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when ``a`` lies on the root path of ``b`` (``a == b`` included)."""
        return self.pos[a] <= self.pos[b] < self.pos[a] + self.size[a]

    def path_to_root(self, v: int) -> list:
        out = [int(v)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def edges(self) -> np.ndarray:
        v = np.flatnonzero(self.parent >= 0)
        return np.stack([self.parent[v], v], axis=1)

    def subtree_sums(self, w: np.ndarray) -> np.ndarray:
        """Sums of per-vertex values (first axis) over every subtree."""
        s = np.array(w, dtype=float, copy=True)
        for v in self.order[::-1]:
            p = self.parent[v]
            if p >= 0:
                s[p] += s[v]
        return s

    def top_vertex(self, verts) -> int:
        """The vertex of a connected vertex set closest to the root."""
        verts = np.asarray(verts)
        return int(verts[np.argmin(self.depth[verts])])

    def is_subtree_set(self, verts) -> bool:
        """Whether ``verts`` is nonempty and induces a connected subtree."""
        verts = np.unique(np.asarray(verts, dtype=np.int64))
        if len(verts) == 0:
            return False
        inset = np.zeros(self.n, dtype=bool)
        inset[verts] = True
        par = self.parent[verts]
        tops = (par < 0) | ~inset[np.maximum(par, 0)]
        return int(tops.sum()) == 1
