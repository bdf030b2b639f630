"""Cube-trees over Whitney covers, consistency certificates and witness curves."""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .tree import Tree
from .whitney import WhitneyCover, connected_components


class TreeError(RuntimeError):
    pass


# --- bounded-depth spanning trees of directed graphs -------------------------

def spanning_tree(successors, root, k: int) -> Tree:
    """Breadth-first spanning tree of a digraph rooted at ``root``.

    ``successors`` maps each vertex to an iterable of heads of its outgoing
    arcs.  Vertices are the keys together with every head.  The result is a
    :class:`Tree` whose ``labels`` list maps tree ids back to vertices; it uses
    only input arcs and has depth at most ``k``.
    """
    verts = list(successors.keys())
    seen = set(verts)
    for v in list(successors.keys()):
        for u in successors[v]:
            if u not in seen:
                seen.add(u)
                verts.append(u)
    if root not in seen:
        raise TreeError("root is not a vertex of the graph")
    ids = {v: i for i, v in enumerate(verts)}
    parent = np.full(len(verts), -2, dtype=np.int64)
    depth = {root: 0}
    parent[ids[root]] = -1
    q = deque([root])
    while q:
        v = q.popleft()
        if depth[v] == k:
            continue
        for u in successors.get(v, ()):
            if u not in depth:
                depth[u] = depth[v] + 1
                parent[ids[u]] = ids[v]
                q.append(u)
    missing = [v for v in verts if v not in depth]
    if missing:
        raise TreeError(f"not in G_k: {len(missing)} vertices unreachable within {k} steps")
    return Tree(parent, labels=verts)


# --- cube-trees ---------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyCertificate:
    """Smallest ``k`` (over ``l <= 64``) with ``l (m' - m'') >= rho - k``.

    ``k_by_l[l-1]`` is the minimal admissible ``k`` for each ``l``; the
    reported pair minimizes ``k`` with ties going to the smaller ``l``.
    """

    k_star: int
    l_star: int
    witness: tuple
    k_by_l: tuple

    def holds(self, tree: Tree, levels, l=None, k=None) -> bool:
        """Exhaustive pair check (quadratic; meant for small trees)."""
        l = self.l_star if l is None else l
        k = self.k_star if k is None else k
        for v in range(tree.n):
            for u in tree.path_to_root(v)[1:]:
                rho = tree.depth[v] - tree.depth[u]
                if l * (levels[v] - levels[u]) < rho - k:
                    return False
        return True


@dataclass(eq=False)
class CubeTree:
    """A rooted tree whose vertex ``v`` is the Whitney cube ``cover.cubes[v]``."""

    tree: Tree
    cover: WhitneyCover
    dropped_cubes: int = 0

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def root(self) -> int:
        return self.tree.root

    @property
    def levels(self) -> np.ndarray:
        return self.cover.levels

    def cube(self, v: int):
        return self.cover.cubes[v]

    def rho(self, a: int, b: int) -> int:
        """Tree distance between comparable vertices."""
        if not (self.tree.is_ancestor(a, b) or self.tree.is_ancestor(b, a)):
            raise TreeError("vertices are not comparable")
        return int(abs(self.tree.depth[a] - self.tree.depth[b]))

    def to_json(self) -> dict:
        return {"vertices": [
            {"id": v, "parent": int(self.tree.parent[v]), "level": c.level,
             "index": list(c.index)} for v, c in enumerate(self.cover.cubes)]}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def consistency_certificate(tree: Tree, levels, l_max: int = 64) -> ConsistencyCertificate:
    levels = np.asarray(levels, dtype=np.int64)
    ls = np.arange(1, l_max + 1, dtype=np.int64)
    n = tree.n
    # best[v] = max over strict ancestors u of l*m_u - depth_u, per l
    best = np.full((n, l_max), np.iinfo(np.int64).min // 4, dtype=np.int64)
    arg = np.full((n, l_max), -1, dtype=np.int64)
    for v in tree.order:
        p = tree.parent[v]
        if p < 0:
            continue
        cand = ls * levels[p] - tree.depth[p]
        take = cand > best[p]
        best[v] = np.where(take, cand, best[p])
        arg[v] = np.where(take, p, arg[p])
    val = tree.depth[:, None] - ls[None, :] * levels[:, None] + best
    if n == 1:
        kl = np.zeros(l_max, dtype=np.int64)
        return ConsistencyCertificate(0, 1, (tree.root, tree.root), tuple(int(x) for x in kl))
    vmax = val.max(axis=0)
    kl = np.maximum(vmax, 0)
    j = int(np.argmin(kl))
    vp = int(np.argmax(val[:, j]))
    return ConsistencyCertificate(int(kl[j]), j + 1, (vp, int(arg[vp, j])),
                                  tuple(int(x) for x in kl))


def build_cube_tree(cover: WhitneyCover, allow_disconnected: bool = False,
                    weight: str = "side"):
    """Shortest-path tree of the face graph rooted at a largest cube.

    The default ``weight="side"`` charges each face step the larger side
    length of its two cubes.  ``weight="hops"`` charges one unit per step
    (the discrete analogue of quasi-hyperbolic length), which leaves the thin
    boundary layer quickly and keeps the consistency constants small.  With
    ``allow_disconnected`` the cover is first restricted to the component of
    the root and the number of dropped cubes is recorded.
    """
    dropped = 0
    comps = connected_components(len(cover.cubes), cover.edges)
    if len(comps) > 1:
        if not allow_disconnected:
            raise TreeError(f"disconnected cover ({len(comps)} components)")
        keep = next(c for c in comps if 0 in c)
        dropped = len(cover.cubes) - len(keep)
        cover = cover.restrict(keep)
    n = len(cover.cubes)
    root = 0  # cubes are sorted by (level, index)
    L = cover.level
    lev = cover.levels
    nbrs = cover.neighbors
    if weight not in ("side", "hops"):
        raise ValueError(f"unknown weight {weight!r}")

    def edge_w(v, u):
        if weight == "side":
            return 1 << (L - min(lev[v], lev[u]))
        # one hop, with the sum of levels as a secondary key so that
        # equal-hop paths prefer larger cubes
        return (1 << 32) + int(lev[u])

    dist = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[root] = 0
    heap = [(0, root)]
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u in nbrs[v]:
            if done[u]:
                continue
            nd = dv + edge_w(v, u)
            if nd < dist[u] or (nd == dist[u] and v < parent[u]):
                dist[u] = nd
                parent[u] = v
                heapq.heappush(heap, (nd, u))
    parent[root] = -1
    tree = Tree(parent)
    ct = CubeTree(tree, cover, dropped)
    return ct, consistency_certificate(tree, lev)


# --- subtree regions ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubtreeRegion:
    """Union of cube interiors of a subtree plus the open faces of its edges."""

    vertices: np.ndarray
    top: int
    measure: float
    ratio: float
    faces: tuple
    cubes: tuple = ()

    def to_json(self) -> dict:
        return {"vertices": [int(v) for v in self.vertices], "top": self.top,
                "measure": self.measure, "ratio": self.ratio}


def shared_face(a, b):
    """Lower/upper corners of the common ``(d-1)``-face of two adjacent cubes."""
    lo = np.maximum(a.lower, b.lower)
    hi = np.minimum(a.upper, b.upper)
    if np.any(hi < lo) or int(np.sum(hi > lo)) != a.dim - 1:
        raise TreeError("cubes do not share a face")
    return lo, hi


def subtree_region(ct: CubeTree, sub) -> SubtreeRegion:
    verts = np.unique(np.asarray(sub, dtype=np.int64))
    if not ct.tree.is_subtree_set(verts):
        raise TreeError("vertex set is not a subtree")
    top = ct.tree.top_vertex(verts)
    vol = ct.cover.volumes
    meas = float(vol[verts].sum())
    faces = []
    for v in verts:
        if v != top:
            p = int(ct.tree.parent[v])
            lo, hi = shared_face(ct.cube(v), ct.cube(p))
            faces.append((int(v), p, lo, hi))
    return SubtreeRegion(verts, top, meas, meas / float(vol[top]), tuple(faces),
                         tuple(ct.cube(v) for v in verts))


# --- witness curves -----------------------------------------------------------

def _box_clearance(p, lo, hi):
    return np.maximum(np.minimum(p - lo, hi - p).min(axis=-1), 0.0)


def _halfspaces(lo, hi):
    out = []
    for i in range(len(lo)):
        out.append((i, -1, lo[i]))   # q_i < lo_i
        out.append((i, +1, hi[i]))   # q_i > hi_i
    return out


def _hs_gap(p, h):
    i, s, c = h
    return np.maximum(p[:, i] - c, 0.0) if s < 0 else np.maximum(c - p[:, i], 0.0)


def union_clearance(p, box_a, box_b=None) -> np.ndarray:
    """Distance from points ``p`` to the complement of one or two closed boxes.

    The complement of ``A u B`` is the union over pairs of half-spaces
    (one outside ``A``, one outside ``B``) of their intersections, and the
    distance to each such intersection has a closed form.
    """
    p = np.atleast_2d(p)
    if box_b is None:
        return _box_clearance(p, *box_a)
    best = np.full(len(p), np.inf)
    for h1 in _halfspaces(*box_a):
        for h2 in _halfspaces(*box_b):
            i1, s1, c1 = h1
            i2, s2, c2 = h2
            if i1 != i2:
                g = np.hypot(_hs_gap(p, h1), _hs_gap(p, h2))
            elif s1 == s2:
                c = min(c1, c2) if s1 < 0 else max(c1, c2)
                g = _hs_gap(p, (i1, s1, c))
            else:
                a = c1 if s1 < 0 else c2      # q_i < a
                b = c2 if s1 < 0 else c1      # q_i > b
                if not b < a:
                    continue
                x = p[:, i1]
                g = np.where(x >= a, x - a, np.where(x <= b, b - x, 0.0))
            best = np.minimum(best, g)
    return best


@dataclass(frozen=True, eq=False)
class WitnessCurve:
    """Unit-speed polyline from ``x`` to the root center with clearance samples."""

    points: np.ndarray
    t: np.ndarray
    clearance: np.ndarray
    a_hat: float

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def at(self, t) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        t = np.clip(np.asarray(t, dtype=float), 0, cum[-1])
        return np.stack([np.interp(t, cum, self.points[:, i])
                         for i in range(self.points.shape[1])], axis=-1)


def _edge_points(ct: CubeTree, a: int, b: int):
    """Face point and next center for the tree step from ``a`` to ``b``."""
    ca, cb = ct.cube(a), ct.cube(b)
    small = ca if ca.level >= cb.level else cb
    lo, hi = shared_face(ca, cb)
    y = small.center.copy()
    ax = int(np.flatnonzero(hi == lo)[0])
    y[ax] = lo[ax]
    return y, cb.center


def _sample_segment(p0, p1, t0, boxes, samples):
    L = float(np.linalg.norm(p1 - p0))
    if L == 0:
        return np.zeros(0), np.zeros(0)
    s = np.arange(1, samples + 1) / samples
    pts = p0[None, :] + s[:, None] * (p1 - p0)[None, :]
    return t0 + s * L, union_clearance(pts, *boxes)


def _box(c):
    return (c.lower, c.upper)


def witness_curve(ct: CubeTree, x, w: int | None = None, samples: int = 64) -> WitnessCurve:
    x = np.asarray(x, dtype=float)
    if w is None:
        w = ct.cover.locate(x)
        if w < 0:
            raise TreeError("x is not in any cube of the tree")
    cw = ct.cube(w)
    if not (np.all(x > cw.lower) and np.all(x < cw.upper)):
        raise TreeError("x is not interior to the cube of w")
    pts = [x, cw.center]
    ts, cl = [], []
    t, tt, aa = 0.0, None, None
    tt, aa = _sample_segment(x, cw.center, 0.0, (_box(cw),), samples)
    ts.append(tt); cl.append(aa)
    t = float(np.linalg.norm(cw.center - x))
    v = w
    while ct.tree.parent[v] >= 0:
        p = int(ct.tree.parent[v])
        y, c = _edge_points(ct, v, p)
        boxes = (_box(ct.cube(v)), _box(ct.cube(p)))
        for a, b in ((pts[-1], y), (y, c)):
            tt, aa = _sample_segment(a, b, t, boxes, samples)
            ts.append(tt); cl.append(aa)
            t += float(np.linalg.norm(b - a))
        pts += [y, c]
        v = p
    ts = np.concatenate(ts)
    cl = np.concatenate(cl)
    pos = ts > 0
    a_hat = float(np.min(cl[pos] / ts[pos])) if pos.any() else math.inf
    return WitnessCurve(np.array(pts), ts, cl, a_hat)


def estimate_john_constant(cover, ct: CubeTree, samples: int = 64) -> float:
    """Minimum witness-curve constant over all cube centers.

    The curve from the center of ``v`` is its own two edge segments followed by
    the curve of its parent, so each vertex's clearance samples are computed
    once and re-used with shifted arc length.
    """
    if ct.n == 1:
        return math.inf
    tree = ct.tree
    n = ct.n
    own_s = np.zeros((n, 2 * samples))
    own_a = np.full((n, 2 * samples), np.inf)
    step = np.zeros(n)
    for v in range(n):
        p = int(tree.parent[v])
        if p < 0:
            continue
        y, c = _edge_points(ct, v, p)
        boxes = (_box(ct.cube(v)), _box(ct.cube(p)))
        c0 = ct.cube(v).center
        s1, a1 = _sample_segment(c0, y, 0.0, boxes, samples)
        l1 = float(np.linalg.norm(y - c0))
        s2, a2 = _sample_segment(y, c, l1, boxes, samples)
        own_s[v] = np.concatenate([s1, s2])
        own_a[v] = np.concatenate([a1, a2])
        step[v] = l1 + float(np.linalg.norm(c - y))
    # arc length from each center to the root
    T = np.zeros(n)
    for v in tree.order:
        p = tree.parent[v]
        if p >= 0:
            T[v] = T[p] + step[v]
    best = math.inf
    for v in range(n):
        path = np.array(tree.path_to_root(v)[:-1], dtype=np.int64)
        if len(path) == 0:
            continue
        t = (T[v] - T[path])[:, None] + own_s[path]
        best = min(best, float(np.min(own_a[path] / t)))
    return best
