import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from johnwidths.measure import ProductPsi
from johnwidths.tree import Tree
from johnwidths.treepart import (DIFFERENCE, PartitionError, balanced_partition,
                                 cardinality_bound, overlap_bound, overlap_count,
                                 partition_tree, sigma, split_vertex, split_vertex_scan)


def path(n):
    return Tree(np.arange(-1, n - 1))


def count_psi(n):
    return ProductPsi.additive(np.ones(n))


def random_tree(rng, n, k):
    parent = [-1]
    kids = [0]
    for v in range(1, n):
        open_ = [u for u in range(v) if kids[u] < k]
        p = int(rng.choice(open_))
        parent.append(p)
        kids[p] += 1
        kids.append(0)
    return Tree(np.array(parent))


def vsets(P):
    return [p.vertices.tolist() for p in P]


def test_split_vertex_path():
    assert split_vertex(path(10), count_psi(10), 3) == 2


def test_split_vertex_root_when_mass_at_root():
    t = Tree(np.array([-1, 0, 0, 1]))
    psi = ProductPsi.additive([10.0, 1.0, 1.0, 1.0])
    assert split_vertex(t, psi, 6.4) == 0


def test_split_vertex_threshold_too_large():
    with pytest.raises(PartitionError, match="threshold too large"):
        split_vertex(path(10), count_psi(10), 5)


def test_sigma_path():
    S = sigma(path(10), count_psi(10), 3)
    assert vsets(S) == [[0, 1], [2], list(range(3, 10))]
    assert S.parts[0].shape == DIFFERENCE and S.parts[0].psi < 3


def test_sigma_root_case_has_no_difference():
    t = Tree(np.array([-1, 0, 0, 1]))
    psi = ProductPsi.additive([10.0, 1.0, 1.0, 1.0])
    S = sigma(t, psi, 6.4)
    assert vsets(S) == [[0], [1, 3], [2]]


def test_partition_path_gamma_two():
    P = partition_tree(path(10), count_psi(10), 2, k=1)
    assert vsets(P) == [[0], [1], [2], [3], [4], [5], [6, 7, 8, 9]]
    assert cardinality_bound(10, 2, 1) == 9


def test_balanced_path_matches_gamma_two():
    P = balanced_partition(path(10), count_psi(10), 5, k=1)
    assert P.gamma == pytest.approx(2) and vsets(P) == vsets(partition_tree(path(10), count_psi(10), 2, 1))
    assert len(P) == 7


def test_star_kept_whole():
    star = Tree(np.array([-1, 0, 0, 0]))
    P = partition_tree(star, count_psi(4), 1, k=3)
    assert vsets(P) == [[0, 1, 2, 3]]


def test_child_count_exceeds_k():
    star = Tree(np.array([-1, 0, 0, 0]))
    with pytest.raises(PartitionError, match="exceeds k"):
        partition_tree(star, count_psi(4), 1, k=2)


def test_zero_psi_single_part():
    P = balanced_partition(path(5), ProductPsi.additive(np.zeros(5)), 3)
    assert vsets(P) == [[0, 1, 2, 3, 4]]


def test_descent_matches_scan_small_trees():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 13))
        t = random_tree(rng, n, 3)
        psi = ProductPsi(rng.exponential(size=(n, 2)), [0.4, 0.6])
        tot = psi(np.arange(n))
        for frac in (0.05, 0.15, 0.3, 0.45):
            g = frac * tot
            scan = split_vertex_scan(t, psi, g)
            assert len(scan) == 1
            assert split_vertex(t, psi, g) == scan[0]


def _check_partition_properties(t, psi, gamma, k, P):
    sv = psi.subtree_values(t)
    lab = P.labels
    # cover, disjoint, subtrees
    assert (lab >= 0).all()
    assert sum(len(p.vertices) for p in P) == t.n
    for p in P:
        assert t.is_subtree_set(p.vertices)
        # heavy parts are singletons
        if p.psi > (k + 2) * gamma * (1 + 1e-12):
            assert len(p.vertices) == 1
        if len(p.vertices) > 1:
            top = p.top
            if p.shape == DIFFERENCE:
                assert p.psi < gamma
                assert sv[p.hole] > sv[top] - gamma
                assert len(p.vertices) == t.size[top] - t.size[p.hole]
            else:
                assert len(p.vertices) == t.size[top]
    bound = cardinality_bound(sv[t.root], gamma, k)
    if bound is not None:
        assert len(P) <= bound
    # restricted counts on every subtree
    for v in range(t.n):
        inside = set(t.subtree(v).tolist())
        meet = sum(1 for p in P if inside & set(p.vertices.tolist()))
        assert meet <= (k + 2) * (math.ceil(sv[v] / gamma) + 1)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 200), st.integers(1, 4), st.floats(0.005, 0.6))
def test_partition_properties_random(seed, n, k, frac):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, n, k)
    psi = ProductPsi.additive(rng.exponential(size=n))
    gamma = frac * psi(np.arange(n))
    P = partition_tree(t, psi, gamma, k)
    _check_partition_properties(t, psi, gamma, k, P)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 150), st.integers(1, 3))
def test_partition_properties_product_psi(seed, n, k):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, n, k)
    psi = ProductPsi(rng.exponential(size=(n, 3)), [0.2, 0.3, 0.5])
    gamma = psi(np.arange(n)) / rng.integers(1, 40)
    P = partition_tree(t, psi, gamma, k)
    _check_partition_properties(t, psi, gamma, k, P)


def test_balanced_multi_vertex_mass_bound():
    rng = np.random.default_rng(1)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        t = random_tree(rng, int(rng.integers(2, 200)), k)
        psi = ProductPsi.additive(rng.exponential(size=t.n))
        n = int(rng.integers(1, 50))
        P = balanced_partition(t, psi, n, k)
        tot = psi(np.arange(t.n))
        for p in P:
            if len(p.vertices) > 1:
                assert p.psi <= (k + 2) * tot / n * (1 + 1e-12)


def test_overlap_identity():
    P = partition_tree(path(10), count_psi(10), 2, 1)
    assert overlap_count(P, P) == 1


def test_overlap_half_gamma_bound():
    rng = np.random.default_rng(11)
    worst = 0
    for _ in range(200):
        k = int(rng.integers(1, 4))
        t = random_tree(rng, int(rng.integers(2, 200)), k)
        psi = ProductPsi.additive(rng.exponential(size=t.n))
        g = psi(np.arange(t.n)) / rng.integers(1, 60)
        P = partition_tree(t, psi, g, k)
        Q = partition_tree(t, psi, g / 2, k)
        c = max(overlap_count(P, Q), overlap_count(Q, P))
        worst = max(worst, c)
        assert c <= overlap_bound(k)
    assert worst >= 2


def test_overlap_mismatched_trees():
    P = partition_tree(path(10), count_psi(10), 2, 1)
    Q = partition_tree(path(11), count_psi(11), 2, 1)
    with pytest.raises(PartitionError):
        overlap_count(P, Q)


def test_overlap_bound_values():
    assert [overlap_bound(k) for k in (1, 2, 3)] == [7, 16, 29]
