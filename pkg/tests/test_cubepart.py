import numpy as np
import pytest

from johnwidths import DyadicCube
from johnwidths.cubepart import ResolutionError, cube_partition_overlap, partition_cube
from johnwidths.dyadic import RingRegion
from johnwidths.measure import DensityMeasure, ProductMeasure

K = DyadicCube(0, (0, 0))


def lebesgue(L, d=2):
    return ProductMeasure([DensityMeasure(np.ones((1 << L,) * d), L)], [1.0])


def corner(L):
    # integrable singularity |x|^-1.5 at the origin
    x = (np.arange(1 << L) + 0.5) / (1 << L)
    dens = np.hypot(x[:, None], x[None, :]) ** -1.5
    return ProductMeasure([DensityMeasure(dens, L)], [1.0])


def assert_invariants(T, phi):
    c = T.check()
    assert c["partition"] and c["card_bound"] and c["mass_bound"]
    if len(phi.measures) == 1:
        assert T.phi.sum() == pytest.approx(T.phi_K, rel=1e-9)
    return c


def test_lebesgue_four_quadrants():
    phi = lebesgue(6)
    T = partition_cube(K, phi, 4)
    assert T.cells == [DyadicCube(1, (i, j)) for i in (0, 1) for j in (0, 1)]
    assert np.allclose(T.phi, 0.25)
    assert_invariants(T, phi)


def test_n_one_is_whole_cube():
    phi = corner(6)
    T = partition_cube(K, phi, 1)
    assert T.cells == [K]


def test_corner_density_produces_rings():
    phi = corner(8)
    T = partition_cube(K, phi, 8)
    c = assert_invariants(T, phi)
    assert c["rings"] > 0
    assert any(isinstance(x, RingRegion) for x in T.cells)


def test_three_dimensional_lebesgue():
    phi = lebesgue(4, 3)
    T = partition_cube(DyadicCube(0, (0, 0, 0)), phi, 8)
    assert len(T) == 8
    assert_invariants(T, phi)


def test_subcube_of_grid():
    phi = corner(6)
    T = partition_cube(DyadicCube(1, (0, 0)), phi, 5)
    assert_invariants(T, phi)


def test_point_mass_too_coarse():
    dens = np.full((64, 64), 1e-3)
    dens[0, 0] = 4.0 ** 6
    phi = ProductMeasure([DensityMeasure(dens, 6)], [1.0])
    with pytest.raises(ResolutionError, match="too coarse"):
        partition_cube(K, phi, 8)


def test_resolution_errors():
    phi = lebesgue(2)
    with pytest.raises(ResolutionError):
        partition_cube(K, phi, 100)
    with pytest.raises(ResolutionError):
        partition_cube(DyadicCube(3, (0, 0)), phi, 1)
    with pytest.raises(ValueError):
        partition_cube(K, phi, 0)


def test_random_densities_invariants():
    rng = np.random.default_rng(5)
    for _ in range(40):
        L = 7
        dens = rng.pareto(1.5, size=(1 << L, 1 << L))
        phi = ProductMeasure([DensityMeasure(dens, L),
                              DensityMeasure(rng.uniform(size=dens.shape), L)], [0.7, 0.3])
        T = partition_cube(K, phi, int(rng.integers(1, 40)))
        assert_invariants(T, phi)


def test_overlap_self_and_precondition():
    phi = corner(8)
    T4 = partition_cube(K, phi, 4)
    assert cube_partition_overlap(T4, T4) == 1
    with pytest.raises(ValueError, match="scale precondition"):
        cube_partition_overlap(T4, partition_cube(K, phi, 9))


def test_overlap_examples():
    leb = lebesgue(8)
    # quadrants already meet the mass bound 3/8, so both levels coincide
    assert cube_partition_overlap(partition_cube(K, leb, 4), partition_cube(K, leb, 8)) == 1
    ph = corner(10)
    c = cube_partition_overlap(partition_cube(K, ph, 4), partition_cube(K, ph, 7))
    assert 1 <= c <= 5  # measured 5 worst case over the random ladder


def test_overlap_ladder_stable():
    rng = np.random.default_rng(2024)
    for trial in range(25):
        L = 8
        dens = rng.exponential(size=(1 << L, 1 << L)) ** 3
        phi = ProductMeasure([DensityMeasure(dens, L)], [1.0])
        C = [cube_partition_overlap(partition_cube(K, phi, m), partition_cube(K, phi, 2 * m))
             for m in (1, 2, 4, 8, 16)]
        assert max(C[3:]) <= 2 * max(C[:3])
