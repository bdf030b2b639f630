"""Partition of a dyadic cube into subcubes and rings of bounded product mass.

Let ``t = Phi(K)/n``.  A dyadic subcube is *big* when ``Phi > 3t``; big cubes
form a subtree of the dyadic refinement of ``K``.  Non-big children of big
cubes become cells.  Along a chain of big cubes with exactly one big child the
layers ``Q_i \\ Q_{i+1}`` are merged into rings ``Q_i \\ Q_j``; superadditivity
gives ``Phi(Q_i \\ Q_j) <= Phi(Q_i) - Phi(Q_j)``, and these drops telescope, so
rings are closed as soon as the drop would pass ``3t``.  Since disjoint big
terminal cubes and chain drops share the budget ``Phi(K) = n t``, the number
of cells stays below ``2^(d+1) n / 3 + O(1) <= 2^d n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicCube, RingRegion


class ResolutionError(RuntimeError):
    pass


@dataclass(eq=False)
class CubePartition:
    K: DyadicCube
    n: int
    cells: list
    phi: np.ndarray
    phi_K: float
    level: int

    def __len__(self):
        return len(self.cells)

    @property
    def threshold(self) -> float:
        return self.phi_K / self.n

    def label_block(self) -> np.ndarray:
        """Cell id of every level-``L`` grid cell inside ``K``."""
        S = self.level - self.K.level
        lab = np.full((1 << S,) * self.K.dim, -1, dtype=np.int64)
        base = np.array(self.K.index) << S

        def sl(c):
            lo = np.array(c.index) * (1 << (self.level - c.level)) - base
            w = 1 << (self.level - c.level)
            return tuple(slice(int(a), int(a) + w) for a in lo)

        outer = [c.outer if isinstance(c, RingRegion) else c for c in self.cells]
        for i in sorted(range(len(self.cells)), key=lambda i: outer[i].level):
            lab[sl(outer[i])] = i
        return lab

    def check(self) -> dict:
        d = self.K.dim
        lab = self.label_block()
        counts = np.bincount(lab.ravel(), minlength=len(self.cells))
        vols = np.array([
            (c.volume if isinstance(c, DyadicCube) else c.volume) for c in self.cells])
        expect = np.rint(vols / 2.0 ** (-self.level * d)).astype(np.int64)
        bound = 3 * self.phi_K / self.n
        return {
            "cards": len(self.cells),
            "card_bound": len(self.cells) <= (2 ** d) * self.n,
            "mass_bound": bool(np.all(self.phi <= bound * (1 + 1e-12) + 1e-300)),
            "partition": bool((lab >= 0).all() and np.array_equal(counts, expect)),
            "rings": sum(isinstance(c, RingRegion) for c in self.cells),
        }

    def to_json(self) -> list:
        out = []
        for c, f in zip(self.cells, self.phi):
            if isinstance(c, RingRegion):
                out.append({"type": "ring", "outer": c.outer.to_json(),
                            "inner": c.inner.to_json(), "phi": float(f)})
            else:
                out.append({"type": "cube", "outer": c.to_json(), "inner": None,
                            "phi": float(f)})
        return out


def _pyramid(masses, S):
    """Block sums of per-cell masses for relative levels ``0..S``."""
    pyr = [None] * (S + 1)
    pyr[S] = masses
    for s in range(S - 1, -1, -1):
        a = pyr[s + 1]
        d = a.ndim - 1
        shape = []
        for size in a.shape[:-1]:
            shape += [size // 2, 2]
        pyr[s] = a.reshape(shape + [a.shape[-1]]).sum(axis=tuple(range(1, 2 * d, 2)))
    return pyr


def partition_cube(K: DyadicCube, phi, n: int) -> CubePartition:
    if n < 1:
        raise ValueError("n must be at least 1")
    L = phi.level
    if K.level > L:
        raise ResolutionError("cube is below the grid resolution")
    d = K.dim
    S = L - K.level
    masses = phi.cell_masses()[K.grid_slices(L)]
    pyr = _pyramid(masses, S)
    F = [phi.combine(p) for p in pyr]
    phiK = float(F[0][(0,) * d])
    t = phiK / n
    cap = 3 * t
    base = np.array(K.index, dtype=np.int64)
    offsets = np.array(list(np.ndindex(*(2,) * d)), dtype=np.int64)

    def glob(s, idx):
        return DyadicCube(K.level + s, tuple(int(x) for x in (base << s) + np.asarray(idx)))

    cells, vals = [], []

    def emit_cube(s, idx):
        cells.append(glob(s, idx))
        vals.append(float(F[s][tuple(idx)]))

    def emit_ring(s0, i0, s1, i1):
        cells.append(RingRegion(glob(s0, i0), glob(s1, i1)))
        vals.append(float(phi.combine(pyr[s0][tuple(i0)] - pyr[s1][tuple(i1)])))

    def kids(s, idx):
        return [tuple(2 * np.asarray(idx) + o) for o in offsets]

    def big(s, idx):
        return F[s][idx] > cap

    if not F[0][(0,) * d] > cap:
        return CubePartition(K, n, [K], np.array([phiK]), phiK, L)

    stack = [(0, (0,) * d)]
    while stack:
        s, idx = stack.pop()
        if s == S:
            raise ResolutionError("resolution too coarse for requested n")
        ch = kids(s, idx)
        heavy = [c for c in ch if big(s + 1, c)]
        if len(heavy) != 1:
            for c in ch:
                if big(s + 1, c):
                    stack.append((s + 1, c))
                else:
                    emit_cube(s + 1, c)
            continue
        # chain of single-big-child cubes starting at (s, idx)
        chain = [(s, idx)]
        cur_s, cur = s, idx
        while True:
            if cur_s == S:
                raise ResolutionError("resolution too coarse for requested n")
            hv = [c for c in kids(cur_s, cur) if big(cur_s + 1, c)]
            if len(hv) != 1:
                break
            cur_s, cur = cur_s + 1, hv[0]
            chain.append((cur_s, cur))
        # chain[-1] has zero or several big children; layers end there
        start = None
        for i in range(len(chain) - 1):
            si, qi = chain[i]
            sn, qn = chain[i + 1]
            drop = F[si][qi] - F[sn][qn]
            if drop > cap:
                if start is not None:
                    emit_ring(*start, si, qi)
                    start = None
                for c in kids(si, qi):
                    if c != qn:
                        emit_cube(si + 1, c)
                continue
            if start is None:
                start = (si, qi)
            elif F[start[0]][start[1]] - F[sn][qn] > cap:
                emit_ring(*start, si, qi)
                start = (si, qi)
        if start is not None:
            emit_ring(*start, *chain[-1])
        stack.append(chain[-1])

    order = sorted(range(len(cells)), key=lambda i: _cell_key(cells[i]))
    cells = [cells[i] for i in order]
    vals = np.array([vals[i] for i in order])
    return CubePartition(K, n, cells, vals, phiK, L)


def _cell_key(c):
    if isinstance(c, RingRegion):
        return (c.outer.level, c.outer.index, c.inner.level - c.outer.level)
    return (c.level, c.index, 0)


def cube_partition_overlap(Tm: CubePartition, Tl: CubePartition) -> int:
    """Largest number of cells of ``Tl`` meeting one cell of ``Tm``."""
    if Tm.K != Tl.K or Tm.level != Tl.level:
        raise ValueError("partitions of different cubes")
    if Tl.n > 2 * Tm.n:
        raise ValueError("scale precondition l <= 2m violated")
    a, b = Tm.label_block().ravel(), Tl.label_block().ravel()
    nb = len(Tl.cells) + 1
    pairs = np.unique(a * nb + b)
    return int(np.bincount(pairs // nb).max())
