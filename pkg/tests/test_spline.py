import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from johnwidths import partition_domain
from johnwidths.dyadic import DyadicCube, RingRegion
from johnwidths.measure import BoundaryWeight, WeightPair
from johnwidths.cubetree import subtree_region
from johnwidths.spline import (Gaussian, NormSpec, Polynomial, SampledFunction, SinProduct,
                               approximate, cell_norms, fit_cells,
                               fit_slope, generator_from_json, mixed_norm, project_local,
                               rate_experiment)

from conftest import prepared


def test_constant_fit_of_x():
    x = (np.arange(1024) + 0.5) / 1024
    sp = fit_cells(x, np.zeros(1024, int), 1)
    assert sp.polynomial(0) == pytest.approx({(0,): 0.5})


def test_affine_fit_of_x_squared():
    n = 1024
    x = (np.arange(n) + 0.5) / n
    sp = fit_cells(x ** 2, np.zeros(n, int), 2)
    poly = sp.polynomial(0)
    # discrete normal equations: b = 1, a = -1/6 - h^2/12
    assert poly[(1,)] == pytest.approx(1.0, abs=1e-10)
    assert poly[(0,)] == pytest.approx(-1 / 6 - 1 / (12 * n * n), abs=1e-10)
    assert poly[(0,)] == pytest.approx(-1 / 6, abs=1e-6)


def _cell_kinds():
    D = prepared("l-shape", 7)
    t = D.ct.tree
    v = int(np.flatnonzero((t.size >= 10) & (t.size <= 40))[0])
    sub = subtree_region(D.ct, t.subtree(v))
    return [DyadicCube(2, (1, 2)), RingRegion(DyadicCube(1, (0, 0)), DyadicCube(3, (1, 1))),
            sub]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_polynomial_reproduction_all_cell_types(r):
    rng = np.random.default_rng(r)
    coeffs = {(a, b): rng.normal() for a in range(r) for b in range(r) if a + b < r}
    P = Polynomial(coeffs, 2)
    f = SampledFunction.from_generator(P, 7)
    spec = NormSpec(2, 2, r, 2)
    for cell in _cell_kinds():
        lp = project_local(f, cell, spec)
        assert lp.degree == r - 1
        for key, c in coeffs.items():
            assert lp.global_coeffs.get(key, 0.0) == pytest.approx(c, abs=1e-9)
        X = rng.uniform(size=(20, 2))
        assert np.allclose(lp(X), P(X), atol=1e-9 * max(1, np.abs(P(X)).max()))


def test_polynomial_reproduction_on_partition():
    D = prepared("l-shape", 8)
    W = WeightPair(2, 2, 2, 2)
    B = partition_domain(D.ct, W.phi(D.mask), 16, 1)
    P = Polynomial({(0, 0): 0.3, (1, 0): -2.0, (0, 1): 1.5}, 2)
    f = SampledFunction.from_generator(P, 8)
    S = approximate(f, B, NormSpec(2, 2, 2, 2))
    region = B.labels >= 0
    assert np.max(np.abs(S.evaluate() - f.values)[region]) <= 1e-9


def test_weighted_fit_reproduces_polynomials():
    D = prepared("cube", 7)
    v = WeightPair(2, 2, 2, 2, vtilde=BoundaryWeight(("x0=0",), 0.4)).v_grid(D.mask)
    B = partition_domain(D.ct, WeightPair(2, 2, 2, 2).phi(D.mask), 8)
    P = Polynomial({(1, 0): 1.0, (0, 1): -1.0}, 2)
    f = SampledFunction.from_generator(P, 7)
    S = approximate(f, B, NormSpec(2, 2, 2, 2, v=v))
    assert np.max(np.abs(S.evaluate() - f.values)[B.labels >= 0]) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    D = prepared("l-shape", 6)
    B = partition_domain(D.ct, WeightPair(2, 2, 2, 2).phi(D.mask), 8)
    spec = NormSpec(2, 2, 2, 2)
    f = SampledFunction(6, rng.normal(size=(64, 64)))
    g = SampledFunction(6, rng.normal(size=(64, 64)))
    Sf, Sg = approximate(f, B, spec), approximate(g, B, spec)
    Sh = approximate(SampledFunction(6, a * f.values + b * g.values), B, spec)
    assert np.allclose(Sh.coeffs, a * Sf.coeffs + b * Sg.coeffs, atol=1e-9)


def test_degree_fallback_warns():
    f = SampledFunction.from_generator(SinProduct(), 4)
    with pytest.warns(UserWarning, match="degree reduced"):
        lp = project_local(f, DyadicCube(4, (3, 3)), NormSpec(2, 2, 3, 2))
    assert lp.degree == 0


def test_grid_mismatch():
    D = prepared("cube", 6)
    B = partition_domain(D.ct, WeightPair(2, 2, 1, 2).phi(D.mask), 4)
    with pytest.raises(ValueError, match="different grids"):
        approximate(SampledFunction.from_generator(SinProduct(), 7), B, NormSpec(2, 2, 1, 2))


def test_mixed_norm_identities():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(32, 32))
    one = np.zeros((32, 32), int)
    spec = NormSpec(2, 2, 1, 2)
    glob = np.sqrt(np.mean(h ** 2))
    assert mixed_norm(h, one, spec) == pytest.approx(glob, rel=1e-12)
    # p >= q: the l_q aggregate equals the global L_q norm on any partition
    labels = rng.integers(0, 7, size=(32, 32))
    spec3 = NormSpec(4, 3, 1, 2)
    assert mixed_norm(h, labels, spec3) == pytest.approx(np.mean(np.abs(h) ** 3) ** (1 / 3),
                                                         rel=1e-12)
    # p < q: the l_p aggregate dominates the global norm
    spec_pq = NormSpec(1.5, 3, 1, 2)
    two = np.zeros((32, 32), int)
    two[16:] = 1
    ind = (two == 0).astype(float)
    assert mixed_norm(ind, two, spec_pq) >= np.mean(ind ** 3) ** (1 / 3) - 1e-15
    assert mixed_norm(h, labels, spec_pq) >= np.mean(np.abs(h) ** 3) ** (1 / 3)
    with pytest.raises(ValueError):
        cell_norms(h, labels, NormSpec(2, float("inf"), 1, 2))


def test_norm_spec_validation():
    with pytest.raises(ValueError):
        NormSpec(1, 2, 1, 2)
    with pytest.raises(ValueError):
        NormSpec(2, 100, 1, 4)
    assert NormSpec(1.5, 3, 1, 2).theory_exponent == pytest.approx(-1 / 6)
    assert NormSpec(2, 2, 1, 2).kappa == pytest.approx(2.0)


@pytest.mark.parametrize("gen", [SinProduct((1, 2)), Gaussian((0.4, 0.6), 0.3),
                                 Polynomial({(2, 1): 1.0, (0, 3): -0.5}, 2)])
def test_finite_differences_match_closed_form(gen):
    f = SampledFunction.from_generator(gen, 9)
    for r in (1, 2):
        exact = f.derivative_norm_grid(r, closed_form=True)
        fd = f.derivative_norm_grid(r, closed_form=False)
        inner = (slice(8, -8),) * 2
        rel = np.abs(fd - exact)[inner].max() / np.abs(exact).max()
        assert rel <= 1e-3


def test_gaussian_derivative_against_difference_quotient():
    g = Gaussian((0.3, 0.7), 0.25)
    X = np.array([[0.41, 0.52], [0.2, 0.9]])
    e = 1e-6
    for j in range(2):
        dX = np.zeros(2)
        dX[j] = e
        num = (g(X + dX) - g(X - dX)) / (2 * e)
        assert np.allclose(g.derivative(X, tuple(int(i == j) for i in range(2))), num, rtol=1e-6)


def test_generator_json_roundtrip():
    for gen in (SinProduct((1, 3)), Gaussian((0.2, 0.5), 0.1), Polynomial({(1, 0): 2.0}, 2)):
        back = generator_from_json(gen.to_json(), 2)
        X = np.random.default_rng(0).uniform(size=(5, 2))
        assert np.allclose(back(X), gen(X))
    with pytest.raises(ValueError):
        generator_from_json({"kind": "spline"}, 2)


def test_refinement_reduces_error():
    D = prepared("cube", 8)
    phi = WeightPair(2, 2, 1, 2).phi(D.mask)
    f = SampledFunction.from_generator(SinProduct(), 8)
    spec = NormSpec(2, 2, 1, 2)
    errs = []
    for n in (4, 16, 64):
        B = partition_domain(D.ct, phi, n)
        errs.append(mixed_norm(f.values - approximate(f, B, spec).evaluate(), B, spec))
    assert errs[0] > errs[1] > errs[2]


def test_polynomial_rate_has_no_slope():
    D = prepared("cube", 7)
    P = Polynomial({(0, 0): 1.0, (1, 0): 0.5}, 2)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        R = rate_experiment(P, D, None, NormSpec(2, 2, 2, 2), [4, 8, 16])
    assert all(row["error"] <= 1e-9 for row in R.rows)
    assert R.slope is None
    assert any("slope undefined" in str(x.message) for x in w)


def test_rate_truncates_on_resolution(tmp_path):
    D = prepared("cube", 5)
    with pytest.warns(UserWarning, match="truncated"):
        R = rate_experiment(SinProduct(), D, None, NormSpec(2, 2, 1, 2), [4, 16, 100000])
    assert [r["n"] for r in R.rows] == [4, 16]
    R.write_csv(tmp_path / "r.csv")
    R.write_manifest(tmp_path / "m.json")
    head = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert head == "n,cells,error,theory_exponent,fitted_slope"


def test_fit_slope():
    ns = np.array([1, 2, 4, 8])
    assert fit_slope(ns, 3.0 * ns ** -0.5) == pytest.approx(-0.5)
    assert fit_slope([4], [1.0]) is None
