"""Two-parameter partitions of a cube-tree region into subtree regions, cubes and rings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cubepart import partition_cube
from .cubetree import CubeTree, subtree_region
from .dyadic import DyadicCube, RingRegion
from .measure import ProductMeasure, psi_from_phi
from .treepart import SINGLETON, balanced_partition


@dataclass(eq=False)
class DomainPartition:
    """Cells of the partition with ``2^m n`` target pieces.

    ``labels`` holds the cell id of every level-``L`` grid cell of the tree
    region and ``-1`` elsewhere (outside cells and the unresolved boundary
    layer).
    """

    ct: CubeTree
    n: int
    m: int
    cells: list
    provenance: list
    phi: np.ndarray
    labels: np.ndarray
    total: float
    k: int
    heavy: list = field(default_factory=list)
    budgets: list = field(default_factory=list)

    def __len__(self):
        return len(self.cells)

    @property
    def target(self) -> int:
        return (1 << self.m) * self.n

    @property
    def c2(self) -> int:
        return max(3, self.k + 2)

    def check(self) -> dict:
        N = self.target
        counts = np.bincount(self.labels[self.labels >= 0], minlength=len(self.cells))
        h = self.ct.cover.h
        d = self.ct.cover.dim
        vols = np.array([_volume(c) for c in self.cells])
        expect = np.rint(vols / h ** d).astype(np.int64)
        region = self.ct.cover.labels >= 0
        rep = {
            "cells": len(self.cells),
            "card_ratio": len(self.cells) / N,
            "partition": bool(np.array_equal(counts, expect)
                              and np.array_equal(self.labels >= 0, region)),
            "budget": sum(self.budgets) <= len(self.heavy) + N,
            "max_phi_ratio": float(self.phi.max() * N / self.total) if self.total > 0 else 0.0,
        }
        rep["mass_bound"] = (self.total == 0 or
                             bool(np.all(self.phi <= self.c2 * self.total / N * (1 + 1e-12))))
        return rep

    def to_json(self) -> dict:
        out = []
        for c, prov, f in zip(self.cells, self.provenance, self.phi):
            if isinstance(c, RingRegion):
                item = {"type": "ring", **c.to_json()}
            elif isinstance(c, DyadicCube):
                item = {"type": "cube", "outer": c.to_json(), "inner": None}
            else:
                item = {"type": "subtree", "vertices": [int(v) for v in c.vertices]}
            item["provenance"] = list(prov)
            item["phi"] = float(f)
            out.append(item)
        return {"n": self.n, "m": self.m, "k": self.k, "phi_total": self.total,
                "heavy": self.heavy, "budgets": self.budgets, "cells": out}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def to_svg(self, size: int = 512) -> str:
        """Cells shaded by their share of the mass bound (2-D only)."""
        if self.ct.cover.dim != 2:
            raise ValueError("SVG rendering is only available for d = 2")
        scale = self.c2 * self.total / self.target if self.total > 0 else 1.0
        shade = np.clip(self.phi / scale, 0, 1) if scale > 0 else np.zeros(len(self.cells))

        def col(x):
            g = int(235 - 170 * x)
            return f"rgb({g},{g},255)"

        def rect(c, fill):
            x0, y0 = c.lower * size
            s = c.side * size
            return (f'<rect x="{x0:.3f}" y="{size - y0 - s:.3f}" width="{s:.3f}" '
                    f'height="{s:.3f}" fill="{fill}" stroke="#334" stroke-width="0.3"/>')

        items = []
        for i, c in enumerate(self.cells):
            if isinstance(c, RingRegion):
                items.append((c.outer.level, rect(c.outer, col(shade[i]))))
            elif isinstance(c, DyadicCube):
                items.append((c.level, rect(c, col(shade[i]))))
            else:
                for q in c.cubes:
                    items.append((q.level, rect(q, col(shade[i]))))
        items.sort(key=lambda t: t[0])
        body = "\n".join(r for _, r in items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
                f'viewBox="0 0 {size} {size}">\n{body}\n</svg>')


def _volume(c) -> float:
    if isinstance(c, (DyadicCube, RingRegion)):
        return c.volume
    return c.measure


def partition_domain(ct: CubeTree, phi: ProductMeasure, n: int, m: int = 0,
                     psi=None) -> DomainPartition:
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    if psi is None:
        psi = psi_from_phi(ct, phi)
    tree = ct.tree
    k = max(1, tree.max_children)
    N = (1 << m) * n
    total = float(psi.subtree_values(tree)[tree.root])
    cover_lab = ct.cover.labels
    if total <= 0:
        reg = subtree_region(ct, np.arange(ct.n))
        labels = np.where(cover_lab >= 0, 0, -1)
        return DomainPartition(ct, n, m, [reg], [("tree-part", 0)], np.array([0.0]),
                               labels, total, k)
    S = balanced_partition(tree, psi, N, k)
    cells, prov = [], []
    vert_cell = np.full(ct.n, -1, dtype=np.int64)
    blocks = []
    heavy, budgets = [], []
    for j, part in enumerate(S.parts):
        if part.shape == SINGLETON and part.psi >= total / N:
            v = int(part.vertices[0])
            lj = math.ceil(N * part.psi / total)
            cp = partition_cube(ct.cube(v), phi, lj)
            heavy.append(j)
            budgets.append(lj)
            blocks.append((ct.cube(v), cp.label_block() + len(cells)))
            cells.extend(cp.cells)
            prov.extend(("cube-part", j) for _ in cp.cells)
        else:
            vert_cell[part.vertices] = len(cells)
            cells.append(subtree_region(ct, part.vertices))
            prov.append(("tree-part", j))
    labels = np.where(cover_lab >= 0, vert_cell[np.maximum(cover_lab, 0)], -1)
    L = ct.cover.level
    for cube, blk in blocks:
        labels[cube.grid_slices(L)] = blk
    vals = phi.label_values(labels, len(cells))
    return DomainPartition(ct, n, m, cells, prov, vals, labels, total, k, heavy, budgets)


def domain_overlap(B1: DomainPartition, B2: DomainPartition) -> int:
    """Largest number of cells of ``B2`` meeting one cell of ``B1`` in positive measure."""
    if B1.ct is not B2.ct or B1.n != B2.n:
        raise ValueError("partitions must share the tree and n")
    sel = B1.labels >= 0
    a, b = B1.labels[sel], B2.labels[sel]
    nb = len(B2.cells) + 1
    pairs = np.unique(a * nb + b)
    return int(np.bincount(pairs // nb).max())


@dataclass(eq=False)
class PreparedDomain:
    """Mask, Whitney cover, cube-tree and consistency certificate of a domain."""

    mask: object
    cover: object
    ct: CubeTree
    certificate: object


def prepare_domain(spec_or_mask, L: int | None = None, allow_disconnected: bool = True,
                   weight: str = "side") -> PreparedDomain:
    from .cubetree import build_cube_tree
    from .dyadic import DomainSpec, GridMask, rasterize
    from .whitney import whitney_decompose

    if isinstance(spec_or_mask, GridMask):
        mask = spec_or_mask
    else:
        spec = spec_or_mask if isinstance(spec_or_mask, DomainSpec) else DomainSpec.from_json(spec_or_mask)
        mask = rasterize(spec, L)
    cover = whitney_decompose(mask)
    ct, cert = build_cube_tree(cover, allow_disconnected=allow_disconnected, weight=weight)
    return PreparedDomain(mask, ct.cover, ct, cert)
