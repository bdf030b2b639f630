"""Density measures, superadditive products of measures and boundary weights."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dyadic import DyadicCube, GridMask, RingRegion

INF = math.inf


class MeasureError(ValueError):
    pass


class HypothesisError(ValueError):
    """A weight/exponent combination outside the admissible range."""

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"violated hypothesis: {name}" + (f" ({detail})" if detail else ""))


def _summed_table(a: np.ndarray) -> np.ndarray:
    s = np.pad(a, [(1, 0)] * a.ndim)
    for ax in range(a.ndim):
        s = np.cumsum(s, axis=ax)
    return s


class DensityMeasure:
    """Absolutely continuous measure given by a density at cell centers.

    Each level-``L`` cell carries mass ``density * 2^(-L d)``; masses of boxes
    come from a summed-area table.
    """

    def __init__(self, density, level: int, mask: GridMask | None = None):
        dens = np.asarray(density, dtype=float)
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise MeasureError("density must be finite and nonnegative")
        if mask is not None:
            dens = np.where(mask.inside, dens, 0.0)
        self.level = level
        self.dim = dens.ndim
        self.masses = dens * 2.0 ** (-level * dens.ndim)
        self._sat = _summed_table(self.masses)

    @property
    def total(self) -> float:
        return float(self._sat[(-1,) * self.dim])

    def box(self, cube: DyadicCube) -> float:
        rng = cube.grid_range(self.level)
        tot = 0.0
        for corner in itertools.product((0, 1), repeat=self.dim):
            idx = tuple(r[c] for r, c in zip(rng, corner))
            sign = (-1) ** (self.dim - sum(corner))
            tot += sign * self._sat[idx]
        return max(float(tot), 0.0)

    def __call__(self, region) -> float:
        if isinstance(region, DyadicCube):
            return self.box(region)
        if isinstance(region, RingRegion):
            return max(self.box(region.outer) - self.box(region.inner), 0.0)
        if hasattr(region, "cubes") and hasattr(region, "vertices"):
            return float(sum(self.box(c) for c in region.cubes))
        a = np.asarray(region)
        if a.dtype == bool:
            return float(self.masses[a].sum())
        raise TypeError(f"unsupported region type {type(region).__name__}")


class ProductMeasure:
    """``Phi(A) = prod_j mu_j(A)^alpha_j`` with positive exponents summing to one."""

    def __init__(self, measures, exponents):
        measures = list(measures)
        alpha = np.asarray(exponents, dtype=float)
        if len(measures) == 0 or len(measures) != len(alpha):
            raise MeasureError("need one exponent per measure")
        if np.any(alpha <= 0):
            raise MeasureError("exponents must be positive")
        if abs(alpha.sum() - 1.0) > 1e-12:
            raise MeasureError(f"exponents must sum to 1, got {alpha.sum()!r}")
        levels = {m.level for m in measures}
        if len(levels) != 1:
            raise MeasureError("measures must share a grid")
        self.measures = measures
        self.alpha = alpha
        self.level = measures[0].level
        self.dim = measures[0].dim

    def combine(self, masses) -> np.ndarray:
        """Apply the product to per-measure masses stacked on the last axis."""
        m = np.maximum(np.asarray(masses, dtype=float), 0.0)
        return np.prod(m ** self.alpha, axis=-1)

    def masses(self, region) -> np.ndarray:
        return np.array([mu(region) for mu in self.measures])

    def __call__(self, region) -> float:
        return float(self.combine(self.masses(region)))

    def cell_masses(self) -> np.ndarray:
        """Per-cell masses, shape ``grid + (l,)``."""
        return np.stack([mu.masses for mu in self.measures], axis=-1)

    def label_values(self, labels, n_cells: int) -> np.ndarray:
        """``Phi`` of every labelled region (label ``-1`` ignored)."""
        lab = np.asarray(labels).ravel()
        sel = lab >= 0
        cols = [np.bincount(lab[sel], weights=mu.masses.ravel()[sel], minlength=n_cells)
                for mu in self.measures]
        return self.combine(np.stack(cols, axis=-1))

    @property
    def total(self) -> float:
        return float(self.combine(np.array([mu.total for mu in self.measures])))


def phi_eval(phi: ProductMeasure, region) -> float:
    return phi(region)


class ProductPsi:
    """Vertex-set function ``Psi(W) = prod_j (sum_{v in W} m_{v j})^alpha_j``.

    With one column and exponent 1 this is an additive weight.
    """

    def __init__(self, masses, alpha=None):
        m = np.asarray(masses, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        if np.any(m < 0):
            raise MeasureError("vertex masses must be nonnegative")
        self.masses = m
        self.alpha = np.ones(1) if alpha is None else np.asarray(alpha, dtype=float)
        if len(self.alpha) != m.shape[1] or abs(self.alpha.sum() - 1) > 1e-12:
            raise MeasureError("exponents must match columns and sum to 1")
        self._cache = {}

    @classmethod
    def additive(cls, weights) -> "ProductPsi":
        return cls(np.asarray(weights, dtype=float)[:, None], [1.0])

    def _combine(self, s):
        # powers rather than exp(log): exact for additive weights
        return np.prod(np.maximum(s, 0.0) ** self.alpha, axis=-1)

    def __call__(self, verts) -> float:
        verts = np.asarray(verts, dtype=np.int64)
        if verts.size == 0:
            return 0.0
        return float(self._combine(self.masses[verts].sum(axis=0)))

    def subtree_values(self, tree) -> np.ndarray:
        key = id(tree)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is tree:
            return hit[1]
        vals = self._combine(tree.subtree_sums(self.masses))
        self._cache[key] = (tree, vals)
        return vals


def psi_from_phi(ct, phi: ProductMeasure) -> ProductPsi:
    """Induced vertex functional of a cube-tree: ``Psi(W) = Phi(union F(v))``."""
    lab = ct.cover.labels.ravel()
    sel = lab >= 0
    m = np.stack([np.bincount(lab[sel], weights=mu.masses.ravel()[sel], minlength=ct.n)
                  for mu in phi.measures], axis=1)
    return ProductPsi(m, phi.alpha)


# --- boundary-distance weights -------------------------------------------------

def _parse_face(sel: str, d: int):
    sel = sel.replace(" ", "")
    if not (sel.startswith("x") and "=" in sel):
        return None
    axis, side = sel[1:].split("=")
    axis, side = int(axis), float(side)
    if not 0 <= axis < d or side not in (0.0, 1.0):
        raise MeasureError(f"bad boundary face selector {sel!r}")
    return axis, side


def domain_boundary_distance(inside: np.ndarray) -> np.ndarray:
    """Exact distance (cell units) from each cell center to the closed outside set.

    Centers and cell corners all lie on the half-cell lattice, and the nearest
    point of a closed lattice box to such a center is again on that lattice,
    so a Euclidean transform on the doubled grid is exact.
    """
    d = inside.ndim
    n = inside.shape[0]
    outside = np.ones((n + 2,) * d, dtype=bool)
    outside[(slice(1, -1),) * d] = ~inside
    size = 2 * (n + 2) + 1
    A = np.zeros((size,) * d, dtype=bool)
    A[(slice(1, None, 2),) * d] = outside
    for ax in range(d):
        B = A.copy()
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[ax], sl_hi[ax] = slice(0, -1), slice(1, None)
        B[tuple(sl_lo)] |= A[tuple(sl_hi)]
        B[tuple(sl_hi)] |= A[tuple(sl_lo)]
        A = B
    dist = ndimage.distance_transform_edt(~A) / 2.0
    return dist[(slice(3, 3 + 2 * n, 2),) * d]


@dataclass(frozen=True)
class BoundaryWeight:
    """``dist(x, Gamma)^lam`` for a boundary piece ``Gamma``.

    ``gamma_set`` is a list of selectors: ``"x<i>=0"`` / ``"x<i>=1"`` for faces
    of the unit box, or ``"boundary"`` for the rasterized domain boundary.
    """

    gamma_set: tuple
    lam: float

    def __post_init__(self):
        gs = self.gamma_set
        if isinstance(gs, str):
            gs = (gs,)
        object.__setattr__(self, "gamma_set", tuple(gs))
        if not self.gamma_set:
            raise MeasureError("boundary set is empty")

    @property
    def c0(self) -> float:
        return 4.0 ** abs(self.lam)

    @property
    def increasing(self) -> bool:
        return self.lam >= 0

    def distance(self, mask: GridMask) -> np.ndarray:
        d = mask.dim
        best = np.full(mask.inside.shape, np.inf)
        centers = None
        for sel in self.gamma_set:
            if sel == "boundary":
                best = np.minimum(best, domain_boundary_distance(mask.inside) * mask.h)
                continue
            face = _parse_face(sel, d)
            if face is None:
                raise MeasureError(f"unknown boundary selector {sel!r}")
            if centers is None:
                centers = mask.cell_centers()
            ax, side = face
            x = centers[..., ax]
            best = np.minimum(best, x if side == 0 else 1.0 - x)
        return best

    @classmethod
    def from_json(cls, obj) -> "BoundaryWeight":
        return cls(tuple(obj.get("gamma_set", ())), float(obj.get("lambda", 0.0)))


def weight_grid(w, mask: GridMask) -> np.ndarray:
    """Weight values at cell centers; zero on outside cells."""
    if w is None:
        vals = np.ones(mask.inside.shape)
    elif isinstance(w, BoundaryWeight):
        if w.lam == 0:
            vals = np.ones(mask.inside.shape)
        else:
            vals = w.distance(mask) ** w.lam
    elif np.isscalar(w):
        vals = np.full(mask.inside.shape, float(w))
    else:
        vals = np.asarray(w, dtype=float)
        if vals.shape != mask.inside.shape:
            raise MeasureError("weight grid shape does not match the mask")
    return np.where(mask.inside, vals, 0.0)


def _inv(x) -> float:
    return 0.0 if x == INF else 1.0 / x


def _num(x) -> float:
    if isinstance(x, str):
        if x.lower() in ("inf", "infinity"):
            return INF
        return float(x)
    return float(x)


@dataclass
class WeightPair:
    """Weights ``g = g0 * gtilde`` and ``v = v0 * vtilde`` with exponents.

    ``g0``/``v0`` are grids, scalars or ``None`` (constant one) with
    integrability exponents ``alpha``/``beta``; ``gtilde``/``vtilde`` are
    :class:`BoundaryWeight` or ``None``.
    """

    p: float
    q: float
    r: int
    d: int
    alpha: float = INF
    beta: float = INF
    g0: object = None
    v0: object = None
    gtilde: BoundaryWeight | None = None
    vtilde: BoundaryWeight | None = None

    def __post_init__(self):
        self.p, self.q = _num(self.p), _num(self.q)
        self.alpha, self.beta = _num(self.alpha), _num(self.beta)
        self.validate()

    @property
    def smoothness(self) -> float:
        return self.r / self.d + _inv(self.q) - _inv(self.p)

    @property
    def inv_p_tilde(self) -> float:
        return _inv(self.p) + _inv(self.alpha)

    @property
    def inv_q_tilde(self) -> float:
        return _inv(self.q) - _inv(self.beta)

    @property
    def inv_kappa_tilde(self) -> float:
        return self.smoothness - _inv(self.alpha) - _inv(self.beta)

    def validate(self):
        p, q = self.p, self.q
        if not (p > 1):
            raise HypothesisError("1 < p <= inf", f"p={p}")
        if not (1 <= q < INF):
            raise HypothesisError("1 <= q < inf", f"q={q}")
        if self.r < 1 or self.d < 1:
            raise HypothesisError("r, d positive integers")
        if not (self.alpha > 1 and self.beta > 1):
            raise HypothesisError("1 < alpha, beta <= inf")
        if not self.beta > q:
            raise HypothesisError("beta > q", f"beta={self.beta}, q={q}")
        if not _inv(p) + _inv(self.alpha) < 1:
            raise HypothesisError("1/p + 1/alpha < 1")
        if not self.smoothness > 0:
            raise HypothesisError("r/d + 1/q - 1/p > 0")
        ik = self.inv_kappa_tilde
        if ik < -1e-12:
            raise HypothesisError("1/kappa_tilde >= 0", f"1/kappa_tilde={ik}")
        if abs(ik) <= 1e-12:
            for w in (self.gtilde, self.vtilde):
                if w is not None and w.lam != 0:
                    raise HypothesisError("1/kappa_tilde = 0 requires gtilde = vtilde = 1")
        if self.gtilde is not None and self.gtilde.lam > 0:
            raise HypothesisError("gtilde non-increasing in the distance (lambda <= 0)")
        if self.vtilde is not None and self.vtilde.lam < 0:
            raise HypothesisError("vtilde non-decreasing in the distance (lambda >= 0)")

    def g_grid(self, mask: GridMask) -> np.ndarray:
        return weight_grid(self.g0, mask) * weight_grid(self.gtilde, mask)

    def v_grid(self, mask: GridMask) -> np.ndarray:
        return weight_grid(self.v0, mask) * weight_grid(self.vtilde, mask)

    def phi(self, mask: GridMask) -> ProductMeasure:
        """The product measure built from ``g0^alpha``, ``v0^beta`` and ``(gtilde vtilde)^kappa``.

        Factors with infinite integrability exponent (bounded ``g0`` or
        ``v0``) or with ``1/kappa_tilde = 0`` are left out; the remaining
        exponents still sum to one.
        """
        s = self.smoothness
        measures, expo = [], []
        L = mask.level
        if self.alpha < INF:
            measures.append(DensityMeasure(weight_grid(self.g0, mask) ** self.alpha, L, mask))
            expo.append(_inv(self.alpha) / s)
        if self.beta < INF:
            measures.append(DensityMeasure(weight_grid(self.v0, mask) ** self.beta, L, mask))
            expo.append(_inv(self.beta) / s)
        ik = self.inv_kappa_tilde
        if ik > 1e-12:
            gv = weight_grid(self.gtilde, mask) * weight_grid(self.vtilde, mask)
            measures.append(DensityMeasure(gv ** (1.0 / ik), L, mask))
            expo.append(ik / s)
        expo = np.array(expo)
        expo = expo / expo.sum()  # absorb rounding only; the sum is 1 analytically
        return ProductMeasure(measures, expo)

    def gv_norm(self, mask: GridMask) -> float:
        """Midpoint estimate of ``||gtilde vtilde||`` in ``L_kappa_tilde``."""
        ik = self.inv_kappa_tilde
        gv = weight_grid(self.gtilde, mask) * weight_grid(self.vtilde, mask)
        if ik <= 1e-12:
            return float(gv[mask.inside].max())
        kap = 1.0 / ik
        return float((np.sum(gv[mask.inside] ** kap) * mask.h ** mask.dim) ** ik)

    @classmethod
    def from_json(cls, obj, p, q, r, d) -> "WeightPair":
        obj = obj or {}

        def grid(x):
            if x is None or x == "1" or x == 1:
                return None
            if isinstance(x, (int, float)):
                return float(x)
            if isinstance(x, dict) and "npy" in x:
                return np.load(x["npy"])
            raise MeasureError(f"unsupported weight grid {x!r}")

        def bw(x):
            return None if not x else BoundaryWeight.from_json(x)

        return cls(p, q, r, d, _num(obj.get("alpha", "inf")), _num(obj.get("beta", "inf")),
                   grid(obj.get("g0")), grid(obj.get("v0")),
                   bw(obj.get("gtilde")), bw(obj.get("vtilde")))
