import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from copulaproc.core import RandomStream, make_uniform_grid, snapped_grid, sup_norm
from copulaproc.empirical import DataMatrix, empirical_copula
from copulaproc.resample import (
    WeightScheme,
    WeightVector,
    block_weights_from_starts,
    bootstrap_copula,
    bootstrap_process,
    bootstrap_replicates,
    default_block_len,
    draw_weights,
    weighted_pseudo_observations,
)


def test_constant_multiplier_gives_unit_weights():
    w = draw_weights(WeightScheme.multiplier("constant"), 7, RandomStream(0))
    assert_array_equal(w.m, np.ones(7))


def test_block_weights_disjoint_cover():
    w = block_weights_from_starts([0, 2, 4], n=6, block_len=2)
    assert_array_equal(w, np.ones(6))


def test_block_weights_repeated_start():
    w = block_weights_from_starts([0, 0, 0], n=6, block_len=2)
    assert_array_equal(w, [3, 3, 0, 0, 0, 0])
    assert w.sum() == 6


def test_block_weights_truncated_last_block():
    # n=7, l=3: k=3 blocks, the third is cut to length 1 (covers index 4 only)
    w = block_weights_from_starts([0, 3, 4], n=7, block_len=3)
    assert_array_equal(w, [1, 1, 1, 1, 2, 1, 0])
    assert w.sum() == 7


def test_block_weights_match_brute_force_count():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        l = int(rng.integers(1, n + 1))
        k = -(-n // l)
        starts = rng.integers(0, n - l + 1, size=k)
        got = block_weights_from_starts(starts, n, l)
        # brute force: walk the blocks and count every selected index
        counts = np.zeros(n)
        for i, s in enumerate(starts):
            length = n - (k - 1) * l if i == k - 1 else l
            for j in range(s, s + length):
                counts[j] += 1
        assert_array_equal(got, counts)


def test_block_full_length_is_identity():
    for seed in range(20):
        w = draw_weights(WeightScheme.block(9), 9, RandomStream(2, seed))
        assert_array_equal(w.m, np.ones(9))


def test_block_len_validation():
    with pytest.raises(ValueError):
        draw_weights(WeightScheme.block(10), 9, RandomStream(0))
    with pytest.raises(ValueError):
        WeightScheme.block(0)


def test_default_block_len_cube_root():
    assert default_block_len(1000) == 10
    assert default_block_len(27) == 3
    assert default_block_len(26) == 2
    assert default_block_len(1) == 1


def test_weight_sums():
    n = 57
    for scheme in (WeightScheme.multinomial(), WeightScheme.block(5)):
        for b in range(300):
            w = draw_weights(scheme, n, RandomStream(3, b))
            assert w.m.sum() == n  # integer schemes are exact
            assert np.all(w.m == np.round(w.m))
    k = -(-n // 5)
    for b in range(100):
        w = draw_weights(WeightScheme.block(5), n, RandomStream(4, b))
        assert w.m.max() <= k
    for b in range(300):
        w = draw_weights(WeightScheme.multiplier(), n, RandomStream(5, b))
        assert abs(w.m.sum() - n) <= 8 * np.spacing(float(n))
        assert np.all(w.m >= 0)


def test_weight_vector_validation():
    with pytest.raises(ValueError):
        WeightVector(np.array([-0.5, 2.5]))
    with pytest.raises(ValueError):
        WeightVector(np.array([1.0, 1.5]))


def test_unit_weights_reproduce_empirical_copula():
    rng = np.random.default_rng(6)
    x = DataMatrix(rng.normal(size=(23, 2)))
    w = WeightVector(np.ones(23))
    for g in (snapped_grid(23, 2), make_uniform_grid(2, 8)):
        assert_array_equal(bootstrap_copula(x, w, g).values,
                           empirical_copula(x, g).values)


def test_single_atom_weight_example():
    # n=2, w=(2,0): the surviving atom maps to weighted margin value 1 in both
    # coordinates, so the bootstrap copula is 1 only at u = (1,1)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = DataMatrix(rng.normal(size=(2, 2)))
        w = WeightVector(np.array([2.0, 0.0]))
        f = bootstrap_copula(x, w, make_uniform_grid(2, 3)).reshaped()
        expected = np.zeros((3, 3))
        expected[-1, -1] = 1.0
        assert_array_equal(f, expected)


def test_three_row_atom_example_against_direct_formula():
    # pseudo-observations {(1/3,1/3),(2/3,1),(1,2/3)} with w=(3,0,0)
    x = DataMatrix(np.array([[1.0, 1.0], [2.0, 3.0], [3.0, 2.0]]))
    w = WeightVector(np.array([3.0, 0.0, 0.0]))
    g = make_uniform_grid(2, 3)
    f = bootstrap_copula(x, w, g).reshaped()
    u_b = weighted_pseudo_observations(x, w)
    assert_array_equal(u_b[0], [1.0, 1.0])  # surviving atom at the weighted-margin image
    direct = np.empty((3, 3))
    for i, a in enumerate(g.axes[0]):
        for j, b in enumerate(g.axes[1]):
            direct[i, j] = np.sum(w.m * ((u_b[:, 0] <= a) & (u_b[:, 1] <= b))) / 3.0
    assert_array_equal(f, direct)
    assert f[-1, -1] == 1.0
    assert f[1, 1] == 0.0


def test_bootstrap_process_zero_cases():
    rng = np.random.default_rng(8)
    x = DataMatrix(rng.normal(size=(30, 2)))
    g = make_uniform_grid(2, 6)
    w = WeightVector(np.ones(30))
    assert sup_norm(bootstrap_process(x, w, g)) == 0.0
    for scheme in (WeightScheme.multinomial(), WeightScheme.multiplier(),
                   WeightScheme.block(4)):
        w = draw_weights(scheme, 30, RandomStream(9))
        f = bootstrap_process(x, w, g).reshaped()
        assert f[-1, -1] == 0.0
        assert_array_equal(f[0, :], np.zeros(6))
        assert_array_equal(f[:, 0], np.zeros(6))


def test_bootstrap_copula_length_mismatch():
    x = DataMatrix(np.random.default_rng(0).normal(size=(5, 2)))
    with pytest.raises(ValueError):
        bootstrap_copula(x, WeightVector(np.ones(4)), make_uniform_grid(2, 3))


def test_bootstrap_replicates_degenerate_scheme():
    x = DataMatrix(np.random.default_rng(1).normal(size=(12, 2)))
    out = bootstrap_replicates(x, WeightScheme.multiplier("constant"),
                               make_uniform_grid(2, 5), 1, sup_norm, RandomStream(2))
    assert out == [0.0]


def test_bootstrap_replicates_deterministic():
    x = DataMatrix(np.random.default_rng(2).normal(size=(40, 2)))
    g = make_uniform_grid(2, 7)
    a = bootstrap_replicates(x, WeightScheme.multinomial(), g, 3, sup_norm, RandomStream(3))
    b = bootstrap_replicates(x, WeightScheme.multinomial(), g, 3, sup_norm, RandomStream(3))
    assert a == b
    assert len(set(a)) > 1


def test_weighted_pseudo_observations_unit_weights_are_ranks():
    rng = np.random.default_rng(3)
    x = DataMatrix(rng.normal(size=(9, 2)))
    u = weighted_pseudo_observations(x, WeightVector(np.ones(9)))
    from copulaproc.empirical import pseudo_observations

    assert_allclose(u, pseudo_observations(x).u_hat, atol=0)
