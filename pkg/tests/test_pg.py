import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pgocc.pg import PgParams, draw_pg, pg_mean, pg_variance, sample_pg1

# PG(1, c) moments from the infinite-series representation
#   PG(1, c) = 1/(2 pi^2) sum_k g_k / ((k - 1/2)^2 + c^2 / (4 pi^2)),  g_k ~ Exp(1)
# summed to two million terms
SERIES_MOMENTS = {
    0.0: (0.25000000000000017, 0.04166666666666666),
    0.5: (0.24491866240370944, 0.039659800808458566),
    1.0: (0.2310585786300051, 0.03444664538852304),
    2.0: (0.1903985389889413, 0.021351238396358673),
    5.0: (0.09866142981514302, 0.0036805349257741137),
    20.0: (0.02499999989694231, 6.249999458947175e-05),
}


@pytest.mark.parametrize("c", sorted(SERIES_MOMENTS))
def test_analytic_moments_match_series(c):
    m, v = SERIES_MOMENTS[c]
    assert pg_mean(PgParams(1, c)) == pytest.approx(m, rel=1e-8)
    assert pg_variance(PgParams(1, c)) == pytest.approx(v, rel=1e-6)


def test_moments_scale_with_shape():
    for c in (0.0, 1.5):
        assert pg_mean(PgParams(3, c)) == pytest.approx(3 * pg_mean(PgParams(1, c)))
        assert pg_variance(PgParams(3, c)) == pytest.approx(3 * pg_variance(PgParams(1, c)))


def test_small_c_variance_is_continuous():
    a = pg_variance(PgParams(1, 0.99e-4))
    b = pg_variance(PgParams(1, 1.01e-4))
    assert a == pytest.approx(b, rel=1e-6)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0, 5.0, 20.0])
def test_sample_moments(c):
    rng = np.random.default_rng(11)
    x = sample_pg1(np.full(50_000, c), rng)
    m, v = SERIES_MOMENTS[c]
    assert abs(x.mean() - m) < 4 * np.sqrt(v / x.size)
    assert x.var() == pytest.approx(v, rel=0.05)
    assert np.all(x > 0)


def test_symmetric_in_c():
    rng = np.random.default_rng(5)
    a = draw_pg(PgParams(1, 2.0), rng, size=20_000)
    b = draw_pg(PgParams(1, -2.0), rng, size=20_000)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_vector_of_mixed_tilts():
    rng = np.random.default_rng(2)
    c = np.tile([0.0, 3.0, -8.0], 20_000)
    x = sample_pg1(c, rng)
    for val in (0.0, 3.0, -8.0):
        sel = x[c == val]
        mean = pg_mean(PgParams(1, val))
        sd = np.sqrt(pg_variance(PgParams(1, val)) / sel.size)
        assert abs(sel.mean() - mean) < 4 * sd


def test_same_seed_same_draws():
    c = np.linspace(-4, 4, 101)
    a = sample_pg1(c, np.random.default_rng(9))
    b = sample_pg1(c, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_shape_preserved():
    x = sample_pg1(np.zeros((3, 4)), np.random.default_rng(0))
    assert x.shape == (3, 4)
    assert isinstance(draw_pg(PgParams(2, 1.0), np.random.default_rng(0)), float)
    assert draw_pg(PgParams(2, 1.0), np.random.default_rng(0), size=(2, 5)).shape == (2, 5)


@pytest.mark.parametrize("d", [0, -1, 1.5])
def test_invalid_shape_rejected(d):
    with pytest.raises(ValueError):
        PgParams(d, 1.0)


def test_tuple_params_accepted():
    assert draw_pg((2, 0.5), np.random.default_rng(0), size=3).shape == (3,)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50, allow_nan=False), st.integers(0, 2**32 - 1))
def test_draws_positive_and_finite(c, seed):
    x = sample_pg1(np.full(200, c), np.random.default_rng(seed))
    assert np.all(np.isfinite(x)) and np.all(x > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 200, allow_nan=False))
def test_mean_is_decreasing_and_bounded(c):
    m = pg_mean(PgParams(1, c))
    assert 0 < m <= 0.25
    assert pg_mean(PgParams(1, c + 1.0)) < m
