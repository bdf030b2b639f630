"""Balanced partitions of rooted trees under superadditive vertex-set functions.

``psi`` is any object with ``psi(vertices) -> float`` and
``psi.subtree_values(tree) -> array``; :class:`~johnwidths.measure.ProductPsi`
covers both additive weights and products of measures.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tree import Tree


class PartitionError(RuntimeError):
    pass


SUBTREE, DIFFERENCE, SINGLETON = "subtree", "difference", "singleton"


@dataclass(frozen=True)
class Part:
    vertices: np.ndarray
    shape: str
    top: int
    hole: int | None
    psi: float

    def to_json(self) -> dict:
        return {"shape": self.shape, "vertices": [int(v) for v in self.vertices],
                "psi": self.psi}


@dataclass(eq=False)
class TreePartition:
    tree: Tree
    gamma: float
    k: int
    parts: list
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    @property
    def labels(self) -> np.ndarray:
        lab = np.full(self.tree.n, -1, dtype=np.int64)
        for i, p in enumerate(self.parts):
            lab[p.vertices] = i
        return lab

    def to_json(self) -> list:
        return [p.to_json() for p in self.parts]

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def _subtree_vals(tree, psi):
    return np.asarray(psi.subtree_values(tree), dtype=float)


def split_vertex(tree: Tree, psi, gamma: float, root: int | None = None,
                 values=None) -> int:
    """Deepest vertex ``v`` of ``T_root`` with ``Psi(T_v) > Psi(T_root) - gamma``.

    The qualifying vertices form a chain from ``root``; the descent follows the
    single qualifying child until none qualifies.
    """
    u = tree.root if root is None else int(root)
    sv = _subtree_vals(tree, psi) if values is None else values
    total = sv[u]
    if not total > 2 * gamma:
        raise PartitionError(f"threshold too large: Psi(T) = {total} <= 2 gamma = {2 * gamma}")
    cut = total - gamma
    v = u
    while True:
        hits = [c for c in tree.children[v] if sv[c] > cut]
        if not hits:
            return v
        if len(hits) > 1:
            raise PartitionError(
                f"several children of {v} exceed the threshold ({hits}); "
                "psi is not superadditive on this tree")
        v = hits[0]


def split_vertex_scan(tree: Tree, psi, gamma: float, root: int | None = None) -> list:
    """All vertices satisfying the split conditions, by exhaustive scan."""
    u = tree.root if root is None else int(root)
    sub = tree.subtree(u)
    total = psi(sub)
    out = []
    for v in sub:
        if psi(tree.subtree(v)) > total - gamma and all(
                psi(tree.subtree(c)) <= total - gamma for c in tree.children[v]):
            out.append(int(v))
    return out


def _make_part(tree, psi, verts, top, hole=None, shape=None):
    verts = np.sort(np.asarray(verts, dtype=np.int64))
    if shape is None:
        shape = SINGLETON if len(verts) == 1 else SUBTREE
    return Part(verts, shape, int(top), hole, psi(verts))


def _difference(tree, u, v):
    a, b = tree.pos[u], tree.pos[v]
    return np.concatenate([tree.order[a:b], tree.order[b + tree.size[v]:a + tree.size[u]]])


def _sort_parts(parts):
    return sorted(parts, key=lambda p: int(p.vertices[0]))


def sigma(tree: Tree, psi, gamma: float, root: int | None = None) -> TreePartition:
    """One split: ``T \\ T_v``, ``{v}`` and the child subtrees of ``v``."""
    u = tree.root if root is None else int(root)
    sv = _subtree_vals(tree, psi)
    v = split_vertex(tree, psi, gamma, u, sv)
    parts = []
    if v != u:
        parts.append(_make_part(tree, psi, _difference(tree, u, v), u, v, DIFFERENCE))
    parts.append(_make_part(tree, psi, [v], v))
    for c in tree.children[v]:
        parts.append(_make_part(tree, psi, tree.subtree(c), c))
    return TreePartition(tree, gamma, tree.max_children, _sort_parts(parts))


def partition_tree(tree: Tree, psi, gamma: float, k: int | None = None,
                   root: int | None = None) -> TreePartition:
    """Recursive balanced partition.

    A subtree with ``Psi <= (k+1) gamma`` is kept whole; otherwise it is split
    at its split vertex and the child subtrees are partitioned in turn.  The
    ``steps`` list records ``(u, v_hat)`` for every split performed.
    """
    if k is None:
        k = max(1, tree.max_children)
    if tree.max_children > k:
        raise PartitionError(f"child count {tree.max_children} exceeds k = {k}")
    if not gamma > 0:
        raise PartitionError("gamma must be positive")
    u0 = tree.root if root is None else int(root)
    sv = _subtree_vals(tree, psi)
    parts, steps = [], []
    stack = [u0]
    while stack:
        u = stack.pop()
        if sv[u] <= (k + 1) * gamma:
            parts.append(_make_part(tree, psi, tree.subtree(u), u))
            continue
        v = split_vertex(tree, psi, gamma, u, sv)
        steps.append((int(u), int(v)))
        if v != u:
            parts.append(_make_part(tree, psi, _difference(tree, u, v), u, int(v), DIFFERENCE))
        parts.append(_make_part(tree, psi, [v], v))
        stack.extend(reversed(tree.children[v]))
    return TreePartition(tree, gamma, k, _sort_parts(parts), steps)


def balanced_partition(tree: Tree, psi, n: int, k: int | None = None) -> TreePartition:
    """Partition with ``gamma = Psi(T) / n``; a single part when ``Psi(T) = 0``."""
    if n < 1:
        raise PartitionError("n must be at least 1")
    total = float(_subtree_vals(tree, psi)[tree.root])
    if k is None:
        k = max(1, tree.max_children)
    if total <= 0:
        return TreePartition(tree, 0.0, k, [_make_part(tree, psi, tree.subtree(tree.root), tree.root)])
    return partition_tree(tree, psi, total / n, k)


def overlap_count(P: TreePartition, Q: TreePartition) -> int:
    """Largest number of parts of ``Q`` meeting a single part of ``P``."""
    if P.tree is not Q.tree and not np.array_equal(P.tree.parent, Q.tree.parent):
        raise PartitionError("partitions are over different trees")
    lp, lq = P.labels, Q.labels
    pairs = np.unique(lp * (len(Q.parts) + 1) + lq)
    return int(np.bincount(pairs // (len(Q.parts) + 1)).max())


def overlap_bound(k: int) -> int:
    """Bound on the parts of one partition meeting a part of the next, for child count ``k``."""
    return 2 + k * (2 * k + 3)


def cardinality_bound(total: float, gamma: float, k: int) -> int | None:
    """``(k+2) ceil(Psi/gamma) - (k+1)(k+2)``, or ``None`` when only one part is allowed."""
    mu = math.ceil(total / gamma)
    if mu >= k + 2:
        return (k + 2) * mu - (k + 1) * (k + 2)
    return None
