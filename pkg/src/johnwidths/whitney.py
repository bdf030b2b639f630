"""Whitney covers of rasterized domains.

Distances are measured between closed sets on the level-``L`` grid: the
boundary is replaced by the union of closed outside cells together with a
ring of ghost cells around ``[0, 1]^d``.  Because all these sets are unions of
lattice boxes, the distance between a cell and the boundary set is attained at
lattice vertices, so an exact Euclidean distance transform on the vertex
lattice gives it without approximation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .dyadic import DyadicCube, GridMask


class WhitneyError(RuntimeError):
    pass


def block_reduce(a: np.ndarray, b: int, func=np.min) -> np.ndarray:
    """Reduce a ``d``-dimensional array over non-overlapping ``b``-blocks."""
    if b == 1:
        return a
    d = a.ndim
    shape = []
    for s in a.shape:
        shape += [s // b, b]
    return func(a.reshape(shape), axis=tuple(range(1, 2 * d, 2)))


def upsample(a: np.ndarray, b: int) -> np.ndarray:
    for ax in range(a.ndim):
        a = np.repeat(a, b, axis=ax)
    return a


def cell_boundary_dist2(inside: np.ndarray) -> np.ndarray:
    """Squared distance (in cell units) from each closed cell to the boundary set."""
    d = inside.ndim
    n = inside.shape[0]
    outside = np.ones((n + 2,) * d, dtype=bool)
    outside[(slice(1, -1),) * d] = ~inside
    pp = np.zeros((n + 4,) * d, dtype=bool)
    pp[(slice(1, -1),) * d] = outside
    verts = np.zeros((n + 3,) * d, dtype=bool)
    for offs in itertools.product((0, 1), repeat=d):
        verts |= pp[tuple(slice(o, o + n + 3) for o in offs)]
    dv = ndimage.distance_transform_edt(~verts)
    dv2 = np.rint(dv * dv).astype(np.int64)
    cell = None
    for offs in itertools.product((0, 1), repeat=d):
        part = dv2[tuple(slice(1 + o, 1 + o + n) for o in offs)]
        cell = part if cell is None else np.minimum(cell, part)
    return cell


@dataclass(eq=False)
class WhitneyCover:
    """Non-overlapping dyadic cubes inside a grid mask.

    ``labels`` maps each level-``L`` cell to the index of the cube holding it,
    or ``-1``.  Inside cells with label ``-1`` form the truncated boundary layer
    that the finite construction cannot resolve.
    """

    level: int
    dim: int
    cubes: list
    dist: np.ndarray
    labels: np.ndarray
    mask: GridMask | None = None
    cell_dist2: np.ndarray | None = None
    degenerate: bool = False

    def __len__(self):
        return len(self.cubes)

    @classmethod
    def from_cubes(cls, cubes, L: int, mask: GridMask | None = None) -> "WhitneyCover":
        cubes = sorted(cubes)
        d = cubes[0].dim
        labels = np.full((1 << L,) * d, -1, dtype=np.int64)
        for i, c in enumerate(cubes):
            sl = c.grid_slices(L)
            if (labels[sl] >= 0).any():
                raise WhitneyError("cubes overlap")
            labels[sl] = i
        cd2 = None
        dist = np.full(len(cubes), np.nan)
        if mask is not None:
            cd2 = cell_boundary_dist2(mask.inside)
            h = 2.0 ** -L
            dist = np.array([np.sqrt(cd2[c.grid_slices(L)].min()) * h for c in cubes])
        return cls(L, d, cubes, dist, labels, mask, cd2)

    @property
    def h(self) -> float:
        return 2.0 ** -self.level

    @cached_property
    def levels(self) -> np.ndarray:
        return np.array([c.level for c in self.cubes], dtype=np.int64)

    @cached_property
    def sides(self) -> np.ndarray:
        return 2.0 ** -self.levels.astype(float)

    @property
    def diams(self) -> np.ndarray:
        return np.sqrt(self.dim) * self.sides

    @property
    def volumes(self) -> np.ndarray:
        return self.sides ** self.dim

    @property
    def residual_cells(self) -> int:
        if self.mask is None:
            return 0
        return int((self.mask.inside & (self.labels < 0)).sum())

    @property
    def residual_mass(self) -> float:
        return self.residual_cells * self.h ** self.dim

    @cached_property
    def edges(self) -> np.ndarray:
        return face_adjacency(self)

    @cached_property
    def neighbors(self) -> list:
        nb = [[] for _ in self.cubes]
        for i, j in self.edges:
            nb[i].append(int(j))
            nb[j].append(int(i))
        return [sorted(x) for x in nb]

    def locate(self, x) -> int:
        """Index of the cube whose grid cell contains the point ``x``."""
        k = np.minimum((np.asarray(x, dtype=float) / self.h).astype(int), (1 << self.level) - 1)
        return int(self.labels[tuple(k)])

    def restrict(self, keep) -> "WhitneyCover":
        keep = np.asarray(sorted(int(i) for i in keep))
        remap = np.full(len(self.cubes) + 1, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        labels = remap[self.labels]  # label -1 indexes the trailing -1
        return WhitneyCover(self.level, self.dim, [self.cubes[i] for i in keep],
                            self.dist[keep], labels, self.mask, self.cell_dist2,
                            self.degenerate)

    def check(self) -> dict:
        """Per-property report of the cover invariants."""
        rep = {}
        counts = np.bincount(self.labels[self.labels >= 0], minlength=len(self.cubes))
        vol_cells = (1 << (self.level - self.levels)) ** self.dim
        rep["non_overlap"] = bool(np.array_equal(counts, vol_cells))
        if self.mask is not None:
            covered = self.labels >= 0
            rep["inside_mask"] = bool(not (covered & ~self.mask.inside).any())
            resid = self.mask.inside & ~covered
            # every uncovered inside cell is too close to the boundary to be a cube
            rep["cover"] = bool((self.cell_dist2[resid] < self.dim).all())
        free = np.ones(len(self.cubes), dtype=bool)
        if self.degenerate:
            free[:] = False
        lo = self.dist >= self.diams * (1 - 1e-12)
        hi = self.dist <= 4 * self.diams * (1 + 1e-12)
        rep["distance_lower"] = bool(lo[free].all())
        rep["distance_upper"] = bool(hi[free].all())
        deg = np.bincount(self.edges.ravel(), minlength=len(self.cubes)) if len(self.edges) else np.zeros(len(self.cubes), int)
        rep["max_degree"] = int(deg.max()) if len(deg) else 0
        rep["degree_bound"] = rep["max_degree"] <= 12 ** self.dim
        if len(self.edges):
            diff = np.abs(self.levels[self.edges[:, 0]] - self.levels[self.edges[:, 1]])
            rep["max_level_difference"] = int(diff.max())
        else:
            rep["max_level_difference"] = 0
        rep["level_difference_bound"] = rep["max_level_difference"] <= 1
        rep["connected"] = bool(len(connected_components(len(self.cubes), self.edges)) == 1)
        rep["cubes"] = len(self.cubes)
        rep["residual_mass"] = self.residual_mass
        return rep

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "dim": self.dim,
            "degenerate": self.degenerate,
            "residual_mass": self.residual_mass,
            "cubes": [{"level": c.level, "index": list(c.index), "dist": float(r)}
                      for c, r in zip(self.cubes, self.dist)],
            "edges": self.edges.tolist(),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def to_svg(self, size: int = 512, fills=None) -> str:
        if self.dim != 2:
            raise ValueError("SVG rendering is only available for d = 2")
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
               f'viewBox="0 0 {size} {size}">']
        for i, c in enumerate(self.cubes):
            x0, y0 = c.lower * size
            s = c.side * size
            fill = fills[i] if fills is not None else "#dde6f0"
            out.append(f'<rect x="{x0:.3f}" y="{size - y0 - s:.3f}" width="{s:.3f}" '
                       f'height="{s:.3f}" fill="{fill}" stroke="#345" stroke-width="0.3"/>')
        out.append("</svg>")
        return "\n".join(out)


def whitney_decompose(mask: GridMask) -> WhitneyCover:
    """Coarse-to-fine Whitney cover with ``diam <= dist <= 4 diam``.

    A cube is accepted when all of it is inside, ``diam <= dist`` and no
    ancestor was accepted.  Since the parent then failed the test,
    ``dist < 4 diam`` follows from the triangle inequality.
    """
    L, d = mask.level, mask.dim
    cd2 = cell_boundary_dist2(mask.inside)
    covered = np.zeros(mask.inside.shape, dtype=bool)
    labels = np.full(mask.inside.shape, -1, dtype=np.int64)
    cubes, dist2 = [], []
    for m in range(L + 1):
        b = 1 << (L - m)
        cube_d2 = block_reduce(cd2, b, np.min)
        taken = block_reduce(covered, b, np.any)
        acc = (cube_d2 >= d * b * b) & ~taken
        if not acc.any():
            continue
        idx = np.argwhere(acc)
        for k in idx:
            cubes.append(DyadicCube(m, tuple(int(v) for v in k)))
            dist2.append(int(cube_d2[tuple(k)]))
        covered |= upsample(acc, b)
    degenerate = False
    if not cubes:
        cube = _single_cube(mask.inside, L)
        if cube is None:
            raise WhitneyError("resolution too coarse")
        cubes = [cube]
        dist2 = [int(cd2[cube.grid_slices(L)].min())]
        degenerate = True
    for i, c in enumerate(cubes):
        labels[c.grid_slices(L)] = i
    dist = np.sqrt(np.array(dist2, dtype=float)) * 2.0 ** -L
    return WhitneyCover(L, d, cubes, dist, labels, mask, cd2, degenerate)


def _single_cube(inside: np.ndarray, L: int):
    """The dyadic cube equal to the inside set, if it is one."""
    pts = np.argwhere(inside)
    lo, hi = pts.min(axis=0), pts.max(axis=0) + 1
    sides = hi - lo
    b = int(sides[0])
    if not np.all(sides == b) or b & (b - 1) or np.any(lo % b):
        return None
    if len(pts) != b ** inside.ndim:
        return None
    m = L - (b.bit_length() - 1)
    return DyadicCube(m, tuple(int(v) for v in lo // b))


def face_adjacency(cover: WhitneyCover) -> np.ndarray:
    """Edges ``(i, j)``, ``i < j``, between cubes sharing a ``(d-1)``-face.

    Two cubes share a face of positive ``(d-1)``-measure exactly when some pair
    of grid cells, one in each, are neighbours along a coordinate axis.
    """
    lab = cover.labels
    pairs = []
    for ax in range(lab.ndim):
        a = np.moveaxis(lab, ax, 0)
        u, v = a[:-1].ravel(), a[1:].ravel()
        sel = (u >= 0) & (v >= 0) & (u != v)
        pairs.append(np.stack([np.minimum(u[sel], v[sel]), np.maximum(u[sel], v[sel])], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.concatenate(pairs)
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


def face_dimension(a: DyadicCube, b: DyadicCube) -> int:
    """Dimension of the intersection of two closed dyadic cubes (-1 if empty)."""
    m = max(a.level, b.level)
    sa, sb = 1 << (m - a.level), 1 << (m - b.level)
    dim = 0
    for ka, kb in zip(a.index, b.index):
        lo = max(ka * sa, kb * sb)
        hi = min((ka + 1) * sa, (kb + 1) * sb)
        if hi < lo:
            return -1
        if hi > lo:
            dim += 1
    return dim


def connected_components(n: int, edges: np.ndarray) -> list:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components as cc

    if n == 0:
        return []
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    k, lab = cc(g, directed=False)
    return [np.flatnonzero(lab == c) for c in range(k)]
