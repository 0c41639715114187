import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import cholesky

from pgocc.gp_kernel import (IllConditionedError, KernelParams, build_covariance, build_sod_grid,
                             factor_with_jitter, kernel_matrix, prior_comparison_report, rw_covariance)


def test_single_point():
    K = build_covariance(KernelParams(1.0, 0.5), [3.0])
    assert K.shape == (1, 1)
    assert K[0, 0] == pytest.approx(0.25 * (1 + 1e-6))


def test_unit_distance_off_diagonal():
    K = kernel_matrix(KernelParams(1.0, 1.0), [0.0, 1.0])
    assert K[0, 1] == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_no_factor_two_in_exponent():
    K = kernel_matrix(KernelParams(2.0, 1.5), [[0.0, 0.0], [3.0, 4.0]])
    assert K[0, 1] == pytest.approx(2.25 * np.exp(-25.0 / 4.0))


def test_far_points_decouple():
    K = kernel_matrix(KernelParams(1.0, 2.0), [0.0, 100.0])
    assert K[0, 1] < 1e-30
    np.testing.assert_allclose(K, 4.0 * np.eye(2))


def test_covariance_is_factorisable():
    pts = np.random.default_rng(0).uniform(0, 10, (60, 2))
    K = build_covariance(KernelParams(3.0, 0.7), pts)
    np.testing.assert_array_equal(K, K.T)
    cholesky(K, lower=True)


def test_jitter_escalates_for_duplicates():
    K = kernel_matrix(KernelParams(1.0, 1.0), np.zeros(5))
    _, _, jitter = factor_with_jitter(K, 1.0)
    assert jitter > 1e-6 * (1 - 1e-12)


def test_ill_conditioned_raises():
    K = -np.eye(3)
    with pytest.raises(IllConditionedError):
        factor_with_jitter(K, 1.0)


@pytest.mark.parametrize("bad", [[np.nan], [[0.0, np.inf]], []])
def test_invalid_points(bad):
    with pytest.raises(ValueError):
        kernel_matrix(KernelParams(1.0, 1.0), bad)


@pytest.mark.parametrize("l,s", [(0.0, 1.0), (1.0, -1.0)])
def test_invalid_params(l, s):
    with pytest.raises(ValueError):
        KernelParams(l, s)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.integers(0, 1000))
def test_translation_invariance(dx, dy, seed):
    pts = np.random.default_rng(seed).uniform(0, 5, (8, 2))
    p = KernelParams(1.3, 0.8)
    np.testing.assert_allclose(kernel_matrix(p, pts), kernel_matrix(p, pts + [dx, dy]), atol=1e-12)


# SoD grid


def test_single_cell():
    g = build_sod_grid([[1, 1], [2, 5], [10, 3], [19, 19]], 20.0)
    assert g.n_centers == 1
    np.testing.assert_array_equal(g.assignment, 0)


def test_two_cells():
    g = build_sod_grid([[0, 0], [25, 0]], 20.0)
    assert g.n_centers == 2
    assert g.assignment[0] != g.assignment[1]


def test_boundary_goes_to_higher_cell():
    g = build_sod_grid([[0, 0], [20, 0], [39, 0]], 20.0)
    assert g.assignment[1] == g.assignment[2] != g.assignment[0]


def test_first_appearance_order():
    g = build_sod_grid([[50, 50], [0, 0], [51, 51]], 20.0)
    np.testing.assert_array_equal(g.assignment, [0, 1, 0])


def test_random_sites_against_brute_force():
    rng = np.random.default_rng(3)
    sites = rng.uniform(0, 100, (10_000, 2))
    g = build_sod_grid(sites, 20.0)
    assert g.n_centers <= 25
    cheb = np.abs(sites - g.centers[g.assignment]).max(axis=1)
    assert cheb.max() <= 10.0 + 1e-9
    # assigned center is the nearest occupied center in max-coordinate distance
    d = np.abs(sites[:, None, :] - g.centers[None, :, :]).max(axis=2)
    assert np.all(d[np.arange(len(sites)), g.assignment] <= d.min(axis=1) + 1e-9)
    assert set(np.unique(g.assignment)) == set(range(g.n_centers))


def test_small_step_recovers_distinct_sites():
    sites = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.5, 2.0]])
    g = build_sod_grid(sites, 1e-3)
    assert g.n_centers == 3
    assert np.abs(sites - g.centers[g.assignment]).max() <= 5e-4 + 1e-12


def test_bad_step():
    with pytest.raises(ValueError):
        build_sod_grid([[0, 0]], 0.0)


# random-walk comparison


def test_rw_entries():
    C = rw_covariance(1.5, 0.5, 4)
    assert C[2, 2] == pytest.approx(1.5**2 + 2 * 0.5**2)
    assert C[0, 3] == pytest.approx(1.5**2)
    np.testing.assert_array_equal(C, C.T)


def test_rw_degenerate():
    np.testing.assert_allclose(rw_covariance(0.7, 0.0, 5), 0.49)


def test_prior_comparison():
    rep = prior_comparison_report(KernelParams(1.0, 0.8), 1.0, 1.0, 5)
    gp, rw = rep["gp"], rep["rw"]
    np.testing.assert_allclose(gp["variance"], 0.64 * (1 + 1e-6))
    np.testing.assert_allclose(gp["lag1_correlation"], gp["lag1_correlation"][0])
    assert gp["stationary"] and not rw["stationary"]
    np.testing.assert_allclose(rw["variance"], [1, 2, 3, 4, 5])
    # corr(b_t, b_t+1) = sqrt(t / (t + 1)) for sigma1 = sigmab
    t = np.arange(1, 5)
    np.testing.assert_allclose(rw["lag1_correlation"], np.sqrt(t / (t + 1)))
    assert np.all(np.diff(rw["lag1_correlation"]) > 0)


def test_prior_comparison_needs_three_points():
    with pytest.raises(ValueError):
        prior_comparison_report(KernelParams(1.0, 1.0), 1.0, 1.0, 2)
