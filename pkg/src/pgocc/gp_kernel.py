"""Squared-exponential GP covariances, the uniform-grid subset-of-data
approximation for site effects, and the random-walk prior comparison."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

JITTER_START = 1e-6
JITTER_MAX = 1e-2


class IllConditionedError(np.linalg.LinAlgError):
    """Covariance could not be factorised even after jitter escalation."""


@dataclass(frozen=True)
class KernelParams:
    l: float
    sigma: float

    def __post_init__(self):
        if not (self.l > 0 and self.sigma > 0):
            raise ValueError(f"kernel length scale and amplitude must be positive: {self}")


@dataclass(frozen=True)
class SodGrid:
    step: float
    centers: np.ndarray      # (M, 2)
    assignment: np.ndarray   # (S,) site -> center index

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]


def as_points(pts) -> np.ndarray:
    """Coerce support points to a 2-D float array of shape (n, dim)."""
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("support points must be a nonempty 1-D or 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("support points contain non-finite coordinates")
    return arr


def kernel_matrix(params: KernelParams, pts) -> np.ndarray:
    """sigma^2 exp(-|xi - xj|^2 / l^2) without any jitter."""
    x = as_points(pts)
    d2 = cdist(x, x, "sqeuclidean")
    return params.sigma**2 * np.exp(-d2 / params.l**2)


def factor_with_jitter(K: np.ndarray, scale: float, name: str = "covariance"):
    """Cholesky-factor ``K + jitter * I`` with escalating relative jitter.

    Returns ``(K_jittered, cho, jitter)`` where ``cho`` is the lower factor
    tuple accepted by :func:`scipy.linalg.cho_solve`.
    """
    rel = JITTER_START
    n = K.shape[0]
    while rel <= JITTER_MAX * (1 + 1e-9):
        Kj = K + rel * scale * np.eye(n)
        try:
            cho = cho_factor(Kj, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            log.info("%s: Cholesky failed at relative jitter %.0e, escalating", name, rel)
            rel *= 10.0
            continue
        if rel > JITTER_START:
            log.info("%s factorised with relative jitter %.0e", name, rel)
        return Kj, cho, rel * scale
    raise IllConditionedError(f"{name} is not positive definite after jitter {JITTER_MAX:g}*sigma^2")


def build_covariance(params: KernelParams, pts) -> np.ndarray:
    """Kernel matrix plus the smallest relative diagonal jitter that factorises."""
    K = kernel_matrix(params, pts)
    Kj, _, _ = factor_with_jitter(K, params.sigma**2)
    return Kj


def build_sod_grid(sites, step: float) -> SodGrid:
    """Snap 2-D sites to the occupied squares of a uniform grid.

    The grid is anchored at the bounding-box minimum; a site on a cell boundary
    goes to the higher-index cell.  Centers are listed in order of first
    appearance so the result is deterministic for a fixed input order.
    """
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step}")
    x = as_points(sites)
    if x.shape[1] != 2:
        raise ValueError("SoD grid needs 2-D site coordinates")
    origin = x.min(axis=0)
    cell = np.floor((x - origin) / step).astype(np.int64)
    ncol = int(cell[:, 0].max()) + 1
    key = cell[:, 1] * ncol + cell[:, 0]
    _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    # relabel unique cells by first appearance
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    assignment = relabel[inverse.ravel()]
    first_cells = cell[first[order]]
    centers = origin + (first_cells + 0.5) * step
    return SodGrid(step=float(step), centers=centers, assignment=assignment)


def rw_covariance(sigma1: float, sigmab: float, T: int) -> np.ndarray:
    """Prior covariance of a Gaussian random walk started at N(., sigma1^2)."""
    idx = np.arange(1, T + 1)
    m = np.minimum.outer(idx, idx)
    return sigma1**2 + (m - 1) * sigmab**2


def _lag1_corr(C: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(C))
    return np.array([C[t, t + 1] / (d[t] * d[t + 1]) for t in range(C.shape[0] - 1)])


def prior_comparison_report(gp: KernelParams, sigma1: float, sigmab: float, T: int) -> dict:
    """Variance and lag-1 correlation profiles of the GP and random-walk priors
    on T unit-spaced years."""
    if T < 3:
        raise ValueError("need at least 3 time points to compare lag-1 correlations")
    gp_cov = build_covariance(gp, np.arange(T, dtype=float))
    rw_cov = rw_covariance(sigma1, sigmab, T)
    report = {}
    for name, C in (("gp", gp_cov), ("rw", rw_cov)):
        var = np.diag(C).copy()
        corr = _lag1_corr(C)
        stationary = bool(np.ptp(var) <= 1e-12 * var.max() and np.ptp(corr) <= 1e-12)
        report[name] = {"variance": var, "lag1_correlation": corr, "stationary": stationary}
    return report
