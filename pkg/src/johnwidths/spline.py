"""Piecewise polynomials on partitions, weighted mixed norms and rate experiments."""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite as H

from .cubepart import ResolutionError
from .dyadic import DyadicCube, RingRegion
from .measure import WeightPair, psi_from_phi

INF = math.inf


# --- test functions with closed-form derivatives -------------------------------

class SinProduct:
    """``prod_i sin(pi k_i x_i)``."""

    def __init__(self, freqs=(1, 1)):
        self.freqs = np.asarray(freqs, dtype=float)

    @property
    def dim(self):
        return len(self.freqs)

    def derivative(self, X, beta) -> np.ndarray:
        out = np.ones(X.shape[:-1])
        for i, (k, b) in enumerate(zip(self.freqs, beta)):
            w = math.pi * k
            out = out * w ** b * np.sin(w * X[..., i] + b * math.pi / 2)
        return out

    def __call__(self, X):
        return self.derivative(X, (0,) * self.dim)

    def to_json(self):
        return {"kind": "sin", "freqs": self.freqs.tolist()}


class Polynomial:
    """``sum_beta c_beta x^beta`` with multi-index keys."""

    def __init__(self, coeffs: dict, dim: int):
        self.coeffs = {tuple(int(b) for b in k): float(c) for k, c in coeffs.items()}
        self.dim = dim

    def derivative(self, X, beta) -> np.ndarray:
        out = np.zeros(X.shape[:-1])
        for a, c in self.coeffs.items():
            if any(ai < bi for ai, bi in zip(a, beta)):
                continue
            term = np.full(X.shape[:-1], c)
            for i, (ai, bi) in enumerate(zip(a, beta)):
                term = term * math.perm(ai, bi) * X[..., i] ** (ai - bi)
            out = out + term
        return out

    def __call__(self, X):
        return self.derivative(X, (0,) * self.dim)

    @property
    def degree(self) -> int:
        return max((sum(a) for a, c in self.coeffs.items() if c != 0), default=0)

    def to_json(self):
        return {"kind": "poly", "dim": self.dim,
                "coeffs": {",".join(map(str, a)): c for a, c in self.coeffs.items()}}


class Gaussian:
    """``exp(-|x - c|^2 / s^2)``, separable, derivatives via Hermite polynomials."""

    def __init__(self, center, width=0.2):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)

    @property
    def dim(self):
        return len(self.center)

    def derivative(self, X, beta) -> np.ndarray:
        out = np.ones(X.shape[:-1])
        s = self.width
        for i, b in enumerate(beta):
            u = (X[..., i] - self.center[i]) / s
            e = np.zeros(b + 1)
            e[b] = 1.0
            out = out * (-1) ** b * H.hermval(u, e) * np.exp(-u * u) / s ** b
        return out

    def __call__(self, X):
        return self.derivative(X, (0,) * self.dim)

    def to_json(self):
        return {"kind": "gauss", "center": self.center.tolist(), "width": self.width}


def generator_from_json(obj, d: int):
    kind = obj.get("kind", "sin")
    if kind == "sin":
        return SinProduct(obj.get("freqs", [1] * d))
    if kind == "poly":
        coeffs = {tuple(int(t) for t in k.split(",")): c for k, c in obj["coeffs"].items()}
        return Polynomial(coeffs, d)
    if kind == "gauss":
        return Gaussian(obj.get("center", [0.5] * d), obj.get("width", 0.2))
    raise ValueError(f"unknown function kind {kind!r}")


def exact_multi_indices(d: int, r: int):
    return [b for b in itertools.product(range(r + 1), repeat=d) if sum(b) == r]


def multi_indices(d: int, deg: int):
    """All multi-indices with ``|beta| <= deg``, by total degree then lexicographic."""
    out = []
    for t in range(deg + 1):
        out += sorted((b for b in itertools.product(range(t + 1), repeat=d) if sum(b) == t),
                      reverse=True)
    return out


def finite_difference(values: np.ndarray, h: float, beta) -> np.ndarray:
    """Mixed partial derivative by repeated second-order central differences."""
    out = np.asarray(values, dtype=float)
    for ax, b in enumerate(beta):
        for _ in range(b):
            out = np.gradient(out, h, axis=ax)
    return out


@dataclass(eq=False)
class SampledFunction:
    """Values at the centers of the level-``L`` cells, optionally with its generator."""

    level: int
    values: np.ndarray
    generator: object = None

    @classmethod
    def from_generator(cls, gen, L: int, d: int | None = None) -> "SampledFunction":
        d = gen.dim if d is None else d
        n = 1 << L
        ax = (np.arange(n) + 0.5) / n
        X = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
        return cls(L, np.asarray(gen(X), dtype=float), gen)

    @property
    def h(self) -> float:
        return 2.0 ** -self.level

    @property
    def dim(self) -> int:
        return self.values.ndim

    def centers(self) -> np.ndarray:
        n = 1 << self.level
        ax = (np.arange(n) + 0.5) / n
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def derivative_norm_grid(self, r: int, closed_form: bool = True) -> np.ndarray:
        """Pointwise ``max_{|beta| = r} |d^beta f|``."""
        betas = exact_multi_indices(self.dim, r)
        if closed_form and self.generator is not None:
            X = self.centers()
            parts = [np.abs(self.generator.derivative(X, b)) for b in betas]
        else:
            parts = [np.abs(finite_difference(self.values, self.h, b)) for b in betas]
        return np.max(parts, axis=0)

    def __sub__(self, other):
        ov = other.values if isinstance(other, SampledFunction) else np.asarray(other)
        return SampledFunction(self.level, self.values - ov)


@dataclass
class NormSpec:
    """Exponents of the mixed norm and target rate, with optional weight grids."""

    p: float
    q: float
    r: int
    d: int
    g: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        self.p, self.q = float(self.p), float(self.q)
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.q >= 1:
            raise ValueError("q must be at least 1")
        if self.r < 1:
            raise ValueError("r must be positive")
        if not self.smoothness > 0:
            raise ValueError("r/d + 1/q - 1/p must be positive")

    @property
    def smoothness(self) -> float:
        return self.r / self.d + (0 if self.q == INF else 1 / self.q) - (0 if self.p == INF else 1 / self.p)

    @property
    def sigma(self) -> float:
        return min(self.p, self.q)

    @property
    def kappa(self) -> float:
        return 1.0 / self.smoothness

    @property
    def theory_exponent(self) -> float:
        ip = 0 if self.p == INF else 1 / self.p
        iq = 0 if self.q == INF else 1 / self.q
        return -self.r / self.d + max(ip - iq, 0.0)


# --- local weighted least squares ------------------------------------------------

@dataclass(eq=False)
class Spline:
    """Per-cell polynomials in local coordinates ``(x - center) / scale``."""

    labels: np.ndarray
    level: int
    multi: list
    centers: np.ndarray
    scales: np.ndarray
    coeffs: np.ndarray
    degrees: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def n_cells(self) -> int:
        return len(self.coeffs)

    def evaluate(self) -> np.ndarray:
        """Values at the centers of all labelled grid cells (zero elsewhere)."""
        lab = self.labels.ravel()
        sel = lab >= 0
        idx = lab[sel]
        n = 1 << self.level
        d = self.labels.ndim
        X = _grid_centers(n, d).reshape(-1, d)[sel]
        U = (X - self.centers[idx]) / self.scales[idx, None]
        out = np.zeros(lab.shape)
        out[sel] = np.einsum("ij,ij->i", _basis(U, self.multi), self.coeffs[idx])
        return out.reshape(self.labels.shape)

    def polynomial(self, i: int):
        """Coefficients of cell ``i`` in global monomials ``x^beta``."""
        from numpy.polynomial import polynomial as P
        out = {}
        c, s = self.centers[i], self.scales[i]
        # expand prod ((x_j - c_j)/s)^b_j
        for beta, a in zip(self.multi, self.coeffs[i]):
            if a == 0:
                continue
            terms = {(): a}
            for j, b in enumerate(beta):
                oned = P.polypow([-c[j] / s, 1.0 / s], b)
                new = {}
                for key, val in terms.items():
                    for e, cv in enumerate(oned):
                        kk = key + (e,)
                        new[kk] = new.get(kk, 0.0) + val * cv
                terms = new
            for key, val in terms.items():
                out[key] = out.get(key, 0.0) + val
        return out


def _grid_centers(n, d):
    ax = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)


def _basis(U, multi):
    cols = []
    for beta in multi:
        col = np.ones(len(U))
        for j, b in enumerate(beta):
            if b:
                col = col * U[:, j] ** b
        cols.append(col)
    return np.stack(cols, axis=1)


def fit_cells(values, labels, r: int, v=None, n_cells: int | None = None) -> Spline:
    """Weighted least-squares polynomials of degree ``< r`` on every labelled region.

    Cells with too few grid cells or an ill-conditioned Gram matrix fall back to
    lower degree; each fallback is listed in ``diagnostics``.
    """
    labels = np.asarray(labels)
    d = labels.ndim
    n = labels.shape[0]
    L = n.bit_length() - 1
    h = 1.0 / n
    lab = labels.ravel()
    sel = lab >= 0
    idx = lab[sel]
    nc = int(idx.max()) + 1 if n_cells is None else n_cells
    X = _grid_centers(n, d).reshape(-1, d)[sel]
    f = np.asarray(values, dtype=float).ravel()[sel]
    w = np.full(len(idx), h ** d) if v is None else (np.asarray(v, float).ravel()[sel] ** 2) * h ** d
    count = np.bincount(idx, minlength=nc)
    safe = np.maximum(count, 1)
    centers = np.stack([np.bincount(idx, X[:, j], minlength=nc) / safe for j in range(d)], axis=1)
    rad = np.zeros(nc)
    np.maximum.at(rad, idx, np.abs(X - centers[idx]).max(axis=1))
    scales = rad + h / 2
    U = (X - centers[idx]) / scales[idx, None]
    multi = multi_indices(d, r - 1)
    M = len(multi)
    B = _basis(U, multi)
    G = np.zeros((nc, M, M))
    for a in range(M):
        for b in range(a, M):
            G[:, a, b] = G[:, b, a] = np.bincount(idx, w * B[:, a] * B[:, b], minlength=nc)
    rhs = np.stack([np.bincount(idx, w * B[:, a] * f, minlength=nc) for a in range(M)], axis=1)
    coeffs = np.zeros((nc, M))
    degrees = np.full(nc, r - 1)
    diag = []

    def well_posed(Gs, cnt, msize):
        dg = np.sqrt(np.einsum("...ii->...i", Gs))
        ok = (cnt >= msize) & np.all(dg > 0, axis=-1)
        dsafe = np.where(dg > 0, dg, 1.0)
        Gn = Gs / (dsafe[..., :, None] * dsafe[..., None, :])
        ev = np.linalg.eigvalsh(Gn)
        return ok & (ev[..., 0] > 1e-12 * ev[..., -1])

    good = well_posed(G, count, M)
    if good.any():
        coeffs[good] = np.linalg.solve(G[good], rhs[good][..., None])[..., 0]
    for i in np.flatnonzero(~good):
        if count[i] == 0:
            degrees[i] = -1
            diag.append((int(i), -1))
            continue
        for deg in range(r - 2, -1, -1):
            msize = len(multi_indices(d, deg))
            Gs = G[i, :msize, :msize]
            if well_posed(Gs[None], count[i:i + 1], msize)[0]:
                coeffs[i, :msize] = np.linalg.solve(Gs, rhs[i, :msize])
                degrees[i] = deg
                break
        else:
            degrees[i] = -1
        diag.append((int(i), int(degrees[i])))
    return Spline(labels, L, multi, centers, scales, coeffs, degrees, diag)


def _region_mask(cell, L: int, d: int) -> np.ndarray:
    m = np.zeros((1 << L,) * d, dtype=bool)
    if isinstance(cell, DyadicCube):
        m[cell.grid_slices(L)] = True
    elif isinstance(cell, RingRegion):
        m[cell.outer.grid_slices(L)] = True
        m[cell.inner.grid_slices(L)] = False
    elif hasattr(cell, "cubes"):
        for c in cell.cubes:
            m[c.grid_slices(L)] = True
    else:
        m = np.asarray(cell, dtype=bool)
    return m


@dataclass(eq=False)
class LocalPolynomial:
    multi: list
    center: np.ndarray
    scale: float
    coeffs: np.ndarray
    degree: int
    global_coeffs: dict

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _basis((X - self.center) / self.scale, self.multi) @ self.coeffs


def project_local(f: SampledFunction, cell, spec: NormSpec) -> LocalPolynomial:
    """Best ``v^2``-weighted fit of degree ``<= r-1`` on one cell."""
    mask = _region_mask(cell, f.level, f.dim)
    if not mask.any():
        raise ValueError("empty cell")
    labels = np.where(mask, 0, -1)
    sp = fit_cells(f.values, labels, spec.r, spec.v, 1)
    if sp.diagnostics:
        warnings.warn(f"degree reduced to {int(sp.degrees[0])} on a small cell")
    return LocalPolynomial(sp.multi, sp.centers[0], float(sp.scales[0]), sp.coeffs[0],
                           int(sp.degrees[0]), sp.polynomial(0))


def _labels_of(partition):
    return partition.labels if hasattr(partition, "labels") else np.asarray(partition)


def approximate(f: SampledFunction, partition, spec: NormSpec) -> Spline:
    labels = _labels_of(partition)
    if labels.shape != f.values.shape:
        raise ValueError("partition and function live on different grids")
    nc = len(partition.cells) if hasattr(partition, "cells") else None
    return fit_cells(f.values, labels, spec.r, spec.v, nc)


def cell_norms(h, labels, spec: NormSpec, n_cells: int | None = None) -> np.ndarray:
    if spec.q == INF:
        raise ValueError("q = inf is not supported")
    vals = h.values if isinstance(h, SampledFunction) else np.asarray(h, dtype=float)
    lab = labels.ravel()
    sel = lab >= 0
    n = labels.shape[0]
    vol = (1.0 / n) ** labels.ndim
    hv = np.abs(vals.ravel()[sel])
    if spec.v is not None:
        hv = hv * np.asarray(spec.v).ravel()[sel]
    nc = int(lab[sel].max()) + 1 if n_cells is None else n_cells
    return np.bincount(lab[sel], hv ** spec.q * vol, minlength=nc) ** (1.0 / spec.q)


def mixed_norm(h, partition, spec: NormSpec) -> float:
    """``l_sigma`` sum over cells of the weighted ``L_q`` norms, ``sigma = min(p, q)``."""
    labels = _labels_of(partition)
    nc = len(partition.cells) if hasattr(partition, "cells") else None
    norms = cell_norms(h, labels, spec, nc)
    s = spec.sigma
    return float(np.sum(norms ** s) ** (1.0 / s))


# --- rate experiments --------------------------------------------------------------

@dataclass
class RateResult:
    rows: list
    slope: float | None
    theory_exponent: float
    manifest: dict

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "cells", "error", "theory_exponent", "fitted_slope"])
            for row in self.rows:
                wr.writerow([row["n"], row["cells"], f"{row['error']:.12e}",
                             f"{self.theory_exponent:.12g}",
                             "" if self.slope is None else f"{self.slope:.12g}"])

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest, fh, indent=1, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def fit_slope(ns, errors):
    ns, errors = np.asarray(ns, float), np.asarray(errors, float)
    if len(ns) < 2 or np.any(errors <= 1e-13):
        return None
    return float(np.polyfit(np.log(ns), np.log(errors), 1)[0])


def rate_experiment(f, domain, weights: WeightPair | None, spec: NormSpec, n_list, m: int = 0,
                    workers: int = 1) -> RateResult:
    """Error of the partition spline against ``n`` and the fitted log-log slope.

    ``domain`` is a :class:`~johnwidths.domainpart.PreparedDomain`.  The error
    for each ``n`` is the mixed norm of ``f - S`` on the tree region divided by
    the midpoint estimate of ``||grad^r f / g||_p`` on the same region.
    """
    from .domainpart import partition_domain

    mask, ct = domain.mask, domain.ct
    L, d = mask.level, mask.dim
    if weights is None:
        weights = WeightPair(spec.p, spec.q, spec.r, spec.d)
    if not isinstance(f, SampledFunction):
        f = SampledFunction.from_generator(f, L, d)
    g = weights.g_grid(mask)
    v = weights.v_grid(mask)
    spec = NormSpec(spec.p, spec.q, spec.r, spec.d, g, v)
    region = ct.cover.labels >= 0
    vol = mask.h ** d
    with np.errstate(divide="ignore", invalid="ignore"):
        dn = f.derivative_norm_grid(spec.r) / np.where(g > 0, g, np.nan)
    dn = dn[region]
    if spec.p == INF:
        fnorm = float(np.nanmax(dn))
    else:
        fnorm = float(np.nansum(dn ** spec.p * vol) ** (1 / spec.p))
    phi = weights.phi(mask)
    psi = psi_from_phi(ct, phi)

    def run(n):
        B = partition_domain(ct, phi, n, m, psi)
        S = approximate(f, B, spec)
        res = np.where(region, f.values - S.evaluate(), 0.0)
        err = mixed_norm(res, B, spec)
        return {"n": int(n), "cells": len(B), "error": err / fnorm if fnorm > 0 else err,
                "raw_error": err, "degree_fallbacks": len(S.diagnostics),
                "card_ratio": len(B) / ((1 << m) * n), "checks": B.check()}

    rows = []
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            futs = [ex.submit(run, n) for n in n_list]
            results = []
            for fu in futs:
                try:
                    results.append(fu.result())
                except ResolutionError:
                    results.append(None)
    else:
        results = []
        for n in n_list:
            try:
                results.append(run(n))
            except ResolutionError:
                results.append(None)
    for n, row in zip(n_list, results):
        if row is None:
            warnings.warn(f"n = {n} exceeds the grid resolution; n_list truncated")
            break
        rows.append(row)
    slope = fit_slope([r["n"] for r in rows], [r["error"] for r in rows])
    if slope is None:
        warnings.warn("slope undefined (fewer than two points or zero error)")
    cert = domain.certificate
    manifest = {
        "L": L, "d": d, "p": spec.p, "q": spec.q, "r": spec.r, "m": m,
        "n_list": [int(n) for n in n_list],
        "cubes": ct.n, "k_star": cert.k_star, "l_star": cert.l_star,
        "max_children": ct.tree.max_children,
        "residual_mass": ct.cover.residual_mass,
        "dropped_cubes": ct.dropped_cubes,
        "f_norm": fnorm, "gv_norm": weights.gv_norm(mask),
        "theory_exponent": spec.theory_exponent, "fitted_slope": slope,
        "rows": [{k: r[k] for k in ("n", "cells", "error", "card_ratio", "degree_fallbacks")}
                 for r in rows],
        "max_card_ratio": max((r["card_ratio"] for r in rows), default=None),
        "max_phi_ratio": max((r["checks"]["max_phi_ratio"] for r in rows), default=None),
    }
    return RateResult(rows, slope, spec.theory_exponent, manifest)
