
import numpy as np
import pytest
from hypothesis import given, strategies as st

from johnwidths import (DomainSpec, DyadicCube, Nesting, RingRegion, nesting_relation,
                        rasterize, subdivide)
from johnwidths.dyadic import SpecError, mask_from_cells, unit_cube


def test_subdivide_quadrants():
    kids = subdivide(unit_cube(2), 1)
    assert [c.index for c in kids] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(c.level == 1 for c in kids)


def test_subdivide_identity():
    K = DyadicCube(3, (2, 5))
    assert subdivide(K, 0) == [K]


def test_subdivide_3d_partitions_cube():
    kids = subdivide(unit_cube(3), 2)
    assert len(kids) == 64
    occ = np.zeros((4, 4, 4), int)
    for c in kids:
        occ[c.grid_slices(2)] += 1
    assert (occ == 1).all()


def test_nesting_cases():
    K = unit_cube(2)
    assert nesting_relation(K, K) is Nesting.EQUAL
    assert nesting_relation(K.children()[1], K) is Nesting.FIRST_IN_SECOND
    assert nesting_relation(K, K.children()[1]) is Nesting.SECOND_IN_FIRST
    assert nesting_relation(DyadicCube(3, (1, 2)), DyadicCube(3, (1, 3))) is Nesting.DISJOINT
    with pytest.raises(ValueError):
        nesting_relation(DyadicCube(1, (0, 0)), DyadicCube(1, (0, 0, 0)))


cubes = st.integers(0, 6).flatmap(
    lambda m: st.tuples(st.just(m), st.integers(0, (1 << m) - 1), st.integers(0, (1 << m) - 1)))


@given(cubes, cubes)
def test_nesting_matches_grid_overlap(a, b):
    A, B = DyadicCube(a[0], a[1:]), DyadicCube(b[0], b[1:])
    L = 6
    ma = np.zeros((64, 64), bool)
    mb = np.zeros((64, 64), bool)
    ma[A.grid_slices(L)] = True
    mb[B.grid_slices(L)] = True
    rel = nesting_relation(A, B)
    inter = (ma & mb).sum()
    if rel is Nesting.DISJOINT:
        assert inter == 0
    elif rel is Nesting.EQUAL:
        assert (ma == mb).all()
    elif rel is Nesting.FIRST_IN_SECOND:
        assert inter == ma.sum() < mb.sum()
    else:
        assert inter == mb.sum() < ma.sum()


def test_cube_geometry():
    c = DyadicCube(2, (1, 3))
    assert c.side == 0.25
    assert np.allclose(c.lower, [0.25, 0.75])
    assert np.isclose(c.diam, 0.25 * np.sqrt(2))
    assert c.parent() == DyadicCube(1, (0, 1))
    assert unit_cube(2).contains(c)
    with pytest.raises(ValueError):
        DyadicCube(1, (2, 0))


def test_ring_requires_strict_nesting():
    K = unit_cube(2)
    r = RingRegion(K, DyadicCube(2, (0, 0)))
    assert np.isclose(r.volume, 1 - 1 / 16)
    with pytest.raises(ValueError):
        RingRegion(K, K)
    with pytest.raises(ValueError):
        RingRegion(DyadicCube(1, (0, 0)), DyadicCube(2, (3, 3)))


def test_rasterize_square_and_lshape_counts():
    assert rasterize(DomainSpec("cube", {}, 2), 4).count == 256
    assert rasterize(DomainSpec("l-shape", {}, 2), 4).count == 192


def test_cusp_coarse_is_degenerate():
    with pytest.raises(SpecError, match="degenerate"):
        rasterize(DomainSpec("cusp", {"sigma": 2}, 2), 1)


def test_square_minus_square_hole():
    m = rasterize(DomainSpec("square-minus-square", {}, 2), 5)
    c = m.cell_centers()
    assert not m.inside[np.all(np.abs(c - 0.5) < 0.2, axis=-1)].any()
    assert m.inside[np.any(np.abs(c - 0.5) > 0.25, axis=-1)].all()


def test_implicit_disc():
    spec = DomainSpec.from_json({"family": "implicit",
                                 "params": {"inequalities": ["(x0-0.5)**2 + (x1-0.5)**2 <= 0.16"]}})
    m = rasterize(spec, 6)
    area = m.count * m.h ** 2
    assert 0.9 * np.pi * 0.16 < area < np.pi * 0.16


def test_implicit_rejects_code():
    with pytest.raises(SpecError):
        DomainSpec("implicit", {"inequalities": ["__import__('os')"]}, 2)


def test_bitmap_pixels_orientation():
    # top row of the image is the upper half of the square
    spec = DomainSpec("bitmap", {"pixels": [[1, 1], [0, 0]]}, 2)
    m = rasterize(spec, 3)
    assert m.inside[:, 4:].all()
    assert not m.inside[:, :3].any()


def test_unknown_family():
    with pytest.raises(SpecError):
        DomainSpec.from_json({"family": "torus"})


def test_mask_from_cells():
    m = mask_from_cells(3, [(1, 2)])
    assert m.count == 1 and m.inside[1, 2]
