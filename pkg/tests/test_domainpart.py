import numpy as np
import pytest

from johnwidths import domain_overlap, partition_domain
from johnwidths.dyadic import DyadicCube, RingRegion
from johnwidths.measure import DensityMeasure, ProductMeasure, WeightPair, psi_from_phi
from johnwidths.treepart import overlap_bound

from conftest import prepared


def lebesgue_phi(D):
    return WeightPair(2, 2, 1, 2).phi(D.mask)


def test_zero_phi_single_cell():
    D = prepared("cube", 6)
    phi = ProductMeasure([DensityMeasure(np.zeros(D.mask.inside.shape), 6)], [1.0])
    B = partition_domain(D.ct, phi, 4, 0)
    assert len(B) == 1
    assert B.check()["partition"]


def test_square_n4_mass_bound():
    D = prepared("cube", 8)
    B = partition_domain(D.ct, lebesgue_phi(D), 4, 0)
    c = B.check()
    assert c["partition"] and c["mass_bound"] and c["budget"]
    assert np.all(B.phi <= B.c2 * B.total / 4 * (1 + 1e-12))
    # single-measure case: cell masses add up to the region mass
    assert B.phi.sum() == pytest.approx(B.total)


@pytest.mark.parametrize("family", ["cube", "l-shape"])
def test_cardinality_ratio_stable_over_ladder(family):
    D = prepared(family, 8)
    phi = lebesgue_phi(D)
    psi = psi_from_phi(D.ct, phi)
    ratios = []
    for m in range(6):
        B = partition_domain(D.ct, phi, 4, m, psi)
        c = B.check()
        assert c["partition"] and c["mass_bound"] and c["budget"]
        ratios.append(c["card_ratio"])
    assert max(ratios) <= 2 * max(ratios[:3])


def test_cell_types_and_provenance():
    D = prepared("l-shape", 8)
    B = partition_domain(D.ct, lebesgue_phi(D), 16, 2)
    kinds = {t for t, _ in B.provenance}
    assert kinds <= {"tree-part", "cube-part"}
    for cell, (tag, _) in zip(B.cells, B.provenance):
        if tag == "cube-part":
            assert isinstance(cell, (DyadicCube, RingRegion))
    assert sum(B.budgets) <= len(B.heavy) + B.target


def test_overlap_self_and_mismatch():
    D = prepared("cube", 8)
    phi = lebesgue_phi(D)
    B = partition_domain(D.ct, phi, 4, 1)
    assert domain_overlap(B, B) == 1
    with pytest.raises(ValueError):
        domain_overlap(B, partition_domain(D.ct, phi, 8, 1))


def _ladder(family, n, L=8):
    D = prepared(family, L)
    phi = lebesgue_phi(D)
    psi = psi_from_phi(D.ct, phi)
    Bs = [partition_domain(D.ct, phi, n, m, psi) for m in range(7)]
    C = [max(domain_overlap(a, b), domain_overlap(b, a)) for a, b in zip(Bs, Bs[1:])]
    return C, D.ct.tree.max_children


@pytest.mark.parametrize("family,n", [("cube", 4), ("cube", 8), ("l-shape", 4), ("l-shape", 8)])
def test_overlap_within_tree_bound(family, n):
    C, k = _ladder(family, n)
    assert max(C) <= overlap_bound(k)


@pytest.mark.parametrize("n", [4, 8])
def test_square_overlap_ladder_stable(n):
    C, _ = _ladder("cube", n)
    assert max(C[3:]) <= 2 * max(C[:3])


@pytest.mark.xfail(strict=True, reason=(
    "measured overlaps on the l-shape at n = 8 are 9, 1, 6, 10, 9, 19 for m = 0..5; "
    "they stay within the tree bound but do not settle within a factor 2"))
def test_lshape_overlap_ladder_stable():
    C, _ = _ladder("l-shape", 8)
    assert max(C[3:]) <= 2 * max(C[:3])


def test_svg_and_json():
    D = prepared("l-shape", 6)
    B = partition_domain(D.ct, lebesgue_phi(D), 4, 1)
    assert B.to_svg().startswith("<svg")
    js = B.to_json()
    assert len(js["cells"]) == len(B)
