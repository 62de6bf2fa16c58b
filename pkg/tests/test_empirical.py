import io

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from copulaproc.core import make_uniform_grid, snapped_grid, sup_norm
from copulaproc.empirical import (
    CsvFormatError,
    DataMatrix,
    PseudoSample,
    StepCdf,
    TieError,
    copula_process,
    empirical_copula,
    empirical_copula_raw,
    generalized_inverse,
    pseudo_observations,
    sequential_process_plus,
    sequential_process_sharp,
)
from copulaproc.models import ClaytonCopula, IndependenceCopula
from copulaproc.core import RandomStream


def _matrix(*rows):
    return DataMatrix(np.array(rows, dtype=float))


# ---------------------------------------------------------------------------
# pseudo-observations


def test_pseudo_observations_rank_definition():
    x = DataMatrix(np.array([[5.0], [1.0], [3.0]]))
    assert_allclose(pseudo_observations(x).u_hat[:, 0], [1.0, 1 / 3, 2 / 3])


def test_pseudo_observations_average_rank_ties():
    x = DataMatrix(np.array([[2.0], [2.0]]))
    assert_allclose(pseudo_observations(x, "average-rank").u_hat[:, 0], [0.75, 0.75])


def test_pseudo_observations_sorted_column_is_identity():
    col = np.arange(1.0, 8.0)
    x = DataMatrix(col[:, None])
    assert_allclose(pseudo_observations(x).u_hat[:, 0], col / 7.0)


def test_pseudo_observations_tie_error_names_column():
    x = _matrix([1.0, 2.0], [3.0, 2.0])
    with pytest.raises(TieError, match="column 1"):
        pseudo_observations(x)


def test_pseudo_observations_column_mean():
    rng = np.random.default_rng(1)
    x = DataMatrix(rng.normal(size=(13, 3)))
    u = pseudo_observations(x).u_hat
    assert_allclose(u.mean(axis=0), np.full(3, 14 / 26))


def test_pseudo_observations_bad_policy():
    with pytest.raises(ValueError):
        pseudo_observations(_matrix([1.0], [2.0]), "drop")


# ---------------------------------------------------------------------------
# step cdfs and generalized inverses


def test_generalized_inverse_two_point_cdf():
    h = StepCdf.from_sample([0.2, 0.5])
    assert generalized_inverse(h, 0.5) == 0.2
    assert generalized_inverse(h, 1.0) == 0.5
    assert generalized_inverse(h, 0.0) == 0.2


def test_generalized_inverse_rejects_outside_unit():
    h = StepCdf.from_sample([0.2, 0.5])
    for p in (-0.1, 1.1):
        with pytest.raises(ValueError):
            generalized_inverse(h, p)


def test_step_cdf_right_continuous_evaluation():
    h = StepCdf.from_sample([1.0, 2.0, 2.0, 4.0])
    assert_allclose(h([0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 9.0]),
                    [0.0, 0.25, 0.25, 0.75, 0.75, 1.0, 1.0])


def test_step_cdf_weighted_skips_zero_weight_jumps():
    h = StepCdf.from_weighted([1.0, 2.0, 3.0], [0.0, 2.0, 2.0])
    assert generalized_inverse(h, 0.0) == 2.0
    assert generalized_inverse(h, 0.4) == 2.0
    assert generalized_inverse(h, 0.8) == 3.0


def test_step_cdf_validation():
    with pytest.raises(ValueError):
        StepCdf(np.array([1.0, 0.5]), np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        StepCdf(np.array([0.5, 1.0]), np.array([0.7, 0.5]))
    with pytest.raises(ValueError):
        StepCdf.from_weighted([1.0, 2.0], [0.0, 0.0])


# ---------------------------------------------------------------------------
# empirical copula


def test_empirical_copula_rank_example():
    # ranks {(1,1),(2,3),(3,2)} scaled by 1/3; only (1/3,1/3) is below (2/3,2/3)
    x = _matrix([1.0, 1.0], [2.0, 3.0], [3.0, 2.0])
    g = snapped_grid(3, 2)
    f = empirical_copula(x, g).reshaped()
    assert f[2, 2] == pytest.approx(1 / 3)
    assert f[-1, -1] == 1.0


def test_empirical_copula_zero_below_min_rank():
    rng = np.random.default_rng(2)
    x = DataMatrix(rng.normal(size=(8, 2)))
    g = make_uniform_grid(2, 11)  # second axis value 0.1 < 1/8
    f = empirical_copula(x, g).reshaped()
    assert f[1, :].max() == 0.0
    assert f[0, :].max() == 0.0
    assert f[:, 0].max() == 0.0


def test_empirical_copula_dimension_mismatch():
    x = _matrix([1.0, 2.0], [2.0, 1.0])
    with pytest.raises(ValueError):
        empirical_copula(x, make_uniform_grid(3, 3))
    with pytest.raises(ValueError):
        empirical_copula(x, make_uniform_grid(2, 3, with_time=True))


def test_two_route_identity_on_rank_aligned_grids():
    # the plug-in and rank routes coincide exactly at points aligned to
    # multiples of 1/n (off that lattice the plug-in thresholds round ranks
    # up, the rank form rounds down)
    rng = np.random.default_rng(3)
    from copulaproc.core import Grid

    for trial in range(30):
        n = 2 * int(rng.integers(1, 21))
        d = int(rng.integers(2, 4))
        x = DataMatrix(rng.normal(size=(n, d)))
        coarse_axis = np.arange(0, n + 1, 2) / n
        coarse = Grid(axes=tuple(coarse_axis.copy() for _ in range(d)))
        for g in (snapped_grid(n, d), coarse):
            a = empirical_copula(x, g).values
            b = empirical_copula_raw(x, g).values
            assert_array_equal(a, b)


def test_empirical_copula_monotone_and_uniform_margins():
    rng = np.random.default_rng(4)
    n = 12
    x = DataMatrix(rng.normal(size=(n, 2)))
    f = empirical_copula(x, snapped_grid(n, 2)).reshaped()
    assert np.all(np.diff(f, axis=0) >= 0)
    assert np.all(np.diff(f, axis=1) >= 0)
    ks = np.arange(n + 1)
    assert_array_equal(f[:, -1], ks / n)
    assert_array_equal(f[-1, :], ks / n)


def test_empirical_copula_rank_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(15, 2))
    g = make_uniform_grid(2, 9)
    base = empirical_copula(DataMatrix(x), g).values
    y = np.column_stack([np.exp(x[:, 0]), x[:, 1] ** 3])
    assert_array_equal(empirical_copula(DataMatrix(y), g).values, base)


# ---------------------------------------------------------------------------
# copula processes


def test_copula_process_trivial_points():
    c = IndependenceCopula(2)
    x = _matrix([0.4, 0.9])
    g = make_uniform_grid(2, 3)
    f = copula_process(x, c, g).reshaped()
    assert f[-1, -1] == 0.0
    assert_array_equal(f[0, :], np.zeros(3))
    assert_array_equal(f[:, 0], np.zeros(3))


def test_copula_process_sup_is_stochastically_bounded():
    # Monte Carlo oracle: for independence, d=2, n=10000, sup stays below 2.5
    # in at least 95% of 200 seeded runs
    c = IndependenceCopula(2)
    g = make_uniform_grid(2, 21)
    below = 0
    for r in range(200):
        x = c.sample(10_000, RandomStream(1000, r))
        if sup_norm(copula_process(x, c, g)) < 2.5:
            below += 1
    assert below >= 190


def test_sequential_sharp_boundaries_and_s1_slice():
    c = ClaytonCopula(2.0)
    rng = np.random.default_rng(6)
    x = DataMatrix(rng.normal(size=(17, 2)))
    g = make_uniform_grid(2, 6, with_time=True)
    sharp = sequential_process_sharp(x, c, g).reshaped()
    assert_array_equal(sharp[0], np.zeros_like(sharp[0]))          # s = 0
    assert_array_equal(sharp[:, -1, -1], np.zeros(sharp.shape[0]))  # u = (1,1)
    flat = copula_process(x, c, make_uniform_grid(2, 6)).reshaped()
    assert_array_equal(sharp[-1], flat)                             # s = 1, bit-exact


def test_sequential_plus_vanishes_at_time_endpoints():
    rng = np.random.default_rng(7)
    x = DataMatrix(rng.normal(size=(9, 2)))
    g = make_uniform_grid(2, 5, with_time=True)
    plus = sequential_process_plus(x, g).reshaped()
    assert_array_equal(plus[0], np.zeros_like(plus[0]))
    assert_array_equal(plus[-1], np.zeros_like(plus[-1]))


def test_sequential_plus_small_example():
    # pseudo-observations (0.5, 1), (1, 0.5): at s = 0.5, u = (1,1) the single
    # indicator equals C_n(1,1) = 1, so the term cancels
    x = _matrix([1.0, 2.0], [2.0, 1.0])
    g = snapped_grid(2, 2, with_time=True)
    plus = sequential_process_plus(x, g).reshaped()
    assert plus[1, -1, -1] == 0.0


def test_plus_equals_sharp_minus_scaled_process():
    c = IndependenceCopula(2)
    rng = np.random.default_rng(8)
    n = 14
    x = DataMatrix(rng.normal(size=(n, 2)))
    g = make_uniform_grid(2, 5, with_time=True)
    plus = sequential_process_plus(x, g).reshaped()
    sharp = sequential_process_sharp(x, c, g).reshaped()
    flat_grid = make_uniform_grid(2, 5)
    cn = empirical_copula(x, flat_grid).reshaped()
    cv = np.asarray(c.cdf(flat_grid.points())).reshape(5, 5)
    floor_sn = np.floor(g.time_axis * n + 1e-9)
    expected = sharp - floor_sn[:, None, None] / np.sqrt(n) * (cn - cv)[None]
    assert_allclose(plus, expected, atol=1e-12)


def test_sequential_requires_time_axis():
    x = _matrix([1.0, 2.0], [2.0, 1.0])
    with pytest.raises(ValueError):
        sequential_process_plus(x, make_uniform_grid(2, 3))


# ---------------------------------------------------------------------------
# CSV ingestion


def test_csv_reads_with_and_without_header():
    text = "a,b\n1.0,2.0\n3.0,4.0\n"
    x = DataMatrix.from_csv(io.StringIO(text))
    assert x.n == 2 and x.d == 2
    y = DataMatrix.from_csv(io.StringIO("1.0,2.0\n3.0,4.0\n"))
    assert_array_equal(x.values, y.values)


def test_csv_rejects_nan_with_line_number():
    with pytest.raises(CsvFormatError, match="line 3"):
        DataMatrix.from_csv(io.StringIO("x,y\n1,2\nnan,4\n"))


def test_csv_rejects_non_numeric_data_line():
    with pytest.raises(CsvFormatError, match="line 2"):
        DataMatrix.from_csv(io.StringIO("1,2\noops,4\n"))


def test_csv_rejects_ragged_rows():
    with pytest.raises(CsvFormatError, match="line 2"):
        DataMatrix.from_csv(io.StringIO("1,2\n3,4,5\n"))


def test_csv_rejects_empty():
    with pytest.raises(CsvFormatError):
        DataMatrix.from_csv(io.StringIO("x,y\n"))


def test_data_matrix_validation():
    with pytest.raises(ValueError):
        DataMatrix(np.array([[np.inf, 1.0]]))
    with pytest.raises(ValueError):
        DataMatrix(np.ones(3))
    with pytest.raises(ValueError):
        PseudoSample(np.array([[0.0, 0.5]]))
