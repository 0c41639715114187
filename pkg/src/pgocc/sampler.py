"""Blocked Gibbs sampler for the spatio-temporal occupancy/detection model.

Occupancy:  logit psi_j = mu + b[t_j] + a~[cell(s_j)] + X^C_j beta + eps[s_j]
Detection:  logit p_i   = u[t_i] + X_i beta_p,        y_i ~ Be(p_i z_{k_i})

One iteration runs, in order:

1. omega_psi ~ PG(1, eta_j) for every sampling unit
2. (l_T, sigma_T) by Metropolis-Hastings on the target with b integrated out
3. (mu, beta, b, a~) jointly from their Gaussian full conditional
4. eps_s, independently per site
5. l_S on its grid, then sigma_S^2 from its inverse-gamma conditional
6. sigma_eps^2
7. z
8. omega_p, (u, beta_p) jointly, then mu_p and sigma_p^2

Step 2 comes before step 3 so the collapsed draw of the temporal
hyperparameters is immediately followed by a fresh draw of b.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.special import expit, gammaln, log_expit

from .crossprod import Design, sparse_cross_products
from .data_model import Dataset, occupancy_design_grid
from .gp_kernel import IllConditionedError, KernelParams, build_sod_grid, factor_with_jitter, kernel_matrix
from .pg import sample_pg1

log = logging.getLogger(__name__)

SCALARS = ("mu_psi", "sigma_T", "l_T", "sigma_S", "l_S", "sigma_eps", "mu_p", "sigma_p")


class SamplerError(RuntimeError):
    """A Gibbs step failed; the message carries the iteration number."""


@dataclass
class Priors:
    """Hyperpriors.  ``sigma0_*`` are standard deviations, ``phi_*`` variances;
    the ``(a, b)`` pairs are inverse-gamma priors on the squared scale
    parameters; ``l_T`` and ``l_S`` get Gamma(shape, rate) priors whose rate
    defaults to ``1 / (extent / 10)`` of the data."""

    mu0_psi: float = 0.0
    sigma0_psi: float = 2.0
    mu0_p: float = 0.0
    sigma0_p: float = 2.0
    phi_psi: float = 4.0
    phi_p: float = 4.0
    a_sigmaT: float = 2.0
    b_sigmaT: float = 1.0
    a_sigmaS: float = 2.0
    b_sigmaS: float = 1.0
    a_eps: float = 2.0
    b_eps: float = 1.0
    a_sigmap: float = 2.0
    b_sigmap: float = 1.0
    a_lT: float = 2.0
    b_lT: float | None = None
    a_lS: float = 2.0
    b_lS: float | None = None

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k.startswith(("mu0",)) or v is None:
                continue
            if not v > 0:
                raise ValueError(f"prior hyperparameter {k} must be positive, got {v}")


@dataclass
class McmcConfig:
    iterations: int = 1000          # kept (post burn-in) iterations, before thinning
    burnin: int = 500
    thin: int = 1
    seed: int = 0
    grid_step_km: float = 20.0
    ls_grid: tuple | None = None
    n_ls_grid: int = 10
    threads: int = 1
    debug_dense_check: bool = False
    spatial: bool = True
    constant_detection: bool = False
    fix_detection_hyper: bool = False   # keep (mu_p, sigma_p) at their initial values
    map_years: tuple | None = None      # year indices whose site maps are stored; None = all
    chunk_size: int = 8192
    mh_step: float = 0.5                # initial random-walk scale on (log l_T, log sigma_T)
    adapt: bool = True


@dataclass
class ModelState:
    mu_psi: float
    beta_psi: np.ndarray
    b: np.ndarray
    a_tilde: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    beta_p: np.ndarray
    z: np.ndarray
    omega_psi: np.ndarray
    omega_p: np.ndarray
    sigma_T: float
    l_T: float
    sigma_S: float
    l_S: float
    sigma_eps: float
    mu_p: float
    sigma_p: float
    ls_index: int = 0

    def copy(self) -> "ModelState":
        return ModelState(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                             for k, v in self.__dict__.items()})


# ---------------------------------------------------------------------------
# model context: everything that is fixed for the whole run


class Model:
    """Static structures derived from a dataset and run configuration."""

    def __init__(self, ds: Dataset, priors: Priors | None = None, config: McmcConfig | None = None):
        self.ds = ds
        self.config = config or McmcConfig()
        cfg = self.config
        self.grid = build_sod_grid(ds.coords, cfg.grid_step_km)
        self.site_cell = self.grid.assignment
        self.M = self.grid.n_centers if cfg.spatial else 0
        self.unit_cell = self.site_cell[ds.unit_site]
        self.w = ds.years.astype(float)
        self.Xc = ds.X_occ if ds.X_occ is not None else np.zeros((ds.J, 0))
        self.Xd = ds.X_det

        groups = [(ds.unit_year, ds.Y)]
        if self.M:
            groups.append((self.unit_cell, self.M))
        self.occ_design = Design(self.Xc, tuple(groups), intercept=True)
        self.Yd = 1 if cfg.constant_detection else ds.Y
        self.obs_dyear = np.zeros(ds.N, dtype=np.int64) if cfg.constant_detection else ds.obs_year
        self.det_design = Design(self.Xd, ((self.obs_dyear, self.Yd),), intercept=False)

        self.has_detection = np.bincount(ds.unit, weights=ds.y, minlength=ds.J) > 0
        self.units_per_site = np.bincount(ds.unit_site, minlength=ds.S)

        span_T = float(np.ptp(self.w)) if ds.Y > 1 else 1.0
        diam = float(np.hypot(*np.ptp(ds.coords, axis=0))) or cfg.grid_step_km
        p = priors or Priors()
        if p.b_lT is None:
            p = _replace(p, b_lT=1.0 / max(span_T / 10.0, 1e-3))
        if p.b_lS is None:
            p = _replace(p, b_lS=1.0 / max(diam / 10.0, 1e-3))
        self.priors = p

        if cfg.ls_grid is not None:
            self.ls_grid = np.asarray(cfg.ls_grid, dtype=float)
        else:
            lo = cfg.grid_step_km
            hi = max(diam, 2 * lo)
            self.ls_grid = np.geomspace(lo, hi, cfg.n_ls_grid)
        self._precompute_spatial()
        occ_dim = self.occ_design.dim
        self.sl_occ = self.occ_design.slices()
        self.occ_dim = occ_dim
        self.Xc_grid = None

    def _precompute_spatial(self):
        self.ls_inv, self.ls_logdet = [], []
        if not self.M:
            return
        for l in self.ls_grid:
            K = kernel_matrix(KernelParams(l, 1.0), self.grid.centers)
            _, cho, jit = factor_with_jitter(K, 1.0, name=f"spatial kernel l={l:g}")
            L = np.tril(cho[0])
            Kinv = cho_solve(cho, np.eye(self.M))
            self.ls_inv.append(0.5 * (Kinv + Kinv.T))
            self.ls_logdet.append(2.0 * np.log(np.diag(L)).sum())
        self.ls_logdet = np.array(self.ls_logdet)

    def temporal_precision(self, l, sigma):
        """Inverse and log-determinant of the (jittered) temporal kernel."""
        K = kernel_matrix(KernelParams(l, sigma), self.w)
        Kj, cho, _ = factor_with_jitter(K, sigma**2, name="temporal kernel")
        Kinv = cho_solve(cho, np.eye(K.shape[0]))
        return 0.5 * (Kinv + Kinv.T), 2.0 * np.log(np.diag(cho[0])).sum(), Kj

    def grid_design(self):
        if self.Xc_grid is None:
            self.Xc_grid = occupancy_design_grid(self.ds)
        return self.Xc_grid


def _replace(p, **kw):
    d = asdict(p)
    d.update(kw)
    return Priors(**d)


# ---------------------------------------------------------------------------
# linear predictors


def occupancy_eta(state: ModelState, model: Model, include_b=True) -> np.ndarray:
    """Occupancy linear predictor for every sampling unit."""
    ds = model.ds
    eta = state.mu_psi + model.Xc @ state.beta_psi + state.eps[ds.unit_site]
    if include_b:
        eta = eta + state.b[ds.unit_year]
    if model.M:
        eta = eta + state.a_tilde[model.unit_cell]
    return eta


def detection_eta(state: ModelState, model: Model, rows=None) -> np.ndarray:
    if rows is None:
        return state.u[model.obs_dyear] + model.Xd @ state.beta_p
    return state.u[model.obs_dyear[rows]] + model.Xd[rows] @ state.beta_p


# ---------------------------------------------------------------------------
# PG sweeps


class _PgPool:
    """Chunked PG sweeps; every chunk gets its own generator seeded from the
    main stream, so results do not depend on the number of threads."""

    def __init__(self, threads=1, chunk=8192):
        self.chunk = int(chunk)
        self.executor = ThreadPoolExecutor(threads) if threads > 1 else None

    def draw(self, c, rng):
        n = c.size
        nchunk = max(1, -(-n // self.chunk))
        seeds = rng.integers(0, 2**63 - 1, size=nchunk)
        bounds = [(i * self.chunk, min(n, (i + 1) * self.chunk)) for i in range(nchunk)]
        out = np.empty(n)

        def work(i):
            lo, hi = bounds[i]
            out[lo:hi] = sample_pg1(c[lo:hi], np.random.default_rng(int(seeds[i])))

        if self.executor is None or nchunk == 1:
            for i in range(nchunk):
                work(i)
        else:
            list(self.executor.map(work, range(nchunk)))
        return out

    def close(self):
        if self.executor is not None:
            self.executor.shutdown()


def update_omega_psi(state: ModelState, model: Model, rng, pool: _PgPool | None = None) -> np.ndarray:
    eta = occupancy_eta(state, model)
    if pool is None:
        return sample_pg1(eta, rng)
    return pool.draw(eta, rng)


# ---------------------------------------------------------------------------
# Gaussian block draws


def gaussian_block_draw(P, r, rng, name="block"):
    """Draw from N(P^-1 r, P^-1) via a Cholesky factor of the precision."""
    try:
        L = np.linalg.cholesky(P)
    except LinAlgError as exc:
        raise IllConditionedError(f"{name}: posterior precision not positive definite") from exc
    mean = cho_solve((L, True), r)
    xi = rng.standard_normal(P.shape[0])
    return mean + solve_triangular(L.T, xi, lower=False)


def occupancy_prior(state: ModelState, model: Model, Kt_inv=None):
    """Prior precision (dense) and precision-times-mean for (mu, beta, b, a~)."""
    p = model.priors
    sl = model.sl_occ
    q = model.occ_dim
    Binv = np.zeros((q, q))
    Binv[0, 0] = 1.0 / p.sigma0_psi**2
    xs = sl["X"]
    Binv[xs, xs] = np.eye(xs.stop - xs.start) / p.phi_psi
    if Kt_inv is None:
        Kt_inv = model.temporal_precision(state.l_T, state.sigma_T)[0]
    Binv[sl["group0"], sl["group0"]] = Kt_inv
    if model.M:
        Binv[sl["group1"], sl["group1"]] = model.ls_inv[state.ls_index] / state.sigma_S**2
    Bb = np.zeros(q)
    Bb[0] = p.mu0_psi / p.sigma0_psi**2
    return Binv, Bb


def pack_occupancy(state: ModelState, model: Model) -> np.ndarray:
    parts = [[state.mu_psi], state.beta_psi, state.b]
    if model.M:
        parts.append(state.a_tilde)
    return np.concatenate(parts)


def update_occupancy_block(state: ModelState, model: Model, rng, Kt_inv=None):
    """Joint draw of (mu_psi, beta_psi, b, a~) given omega_psi, z and eps.

    Returns ``(mu_psi, beta_psi, b, a_tilde)``.
    """
    ds = model.ds
    kvec = state.z - 0.5 - state.omega_psi * state.eps[ds.unit_site]
    P, r = sparse_cross_products(model.occ_design, state.omega_psi, kvec)
    if model.config.debug_dense_check:
        Xd = model.occ_design.dense()
        dense = Xd.T @ (state.omega_psi[:, None] * Xd)
        if not np.allclose(P, dense, rtol=1e-10, atol=1e-10 * np.abs(dense).max()):
            raise AssertionError("sparse and dense X'OmegaX disagree")
    Binv, Bb = occupancy_prior(state, model, Kt_inv)
    beta = gaussian_block_draw(P + Binv, r + Bb, rng, name="occupancy block")
    sl = model.sl_occ
    a = beta[sl["group1"]] if model.M else state.a_tilde
    return float(beta[0]), beta[sl["X"]], beta[sl["group0"]], a


def update_eps(state: ModelState, model: Model, rng) -> np.ndarray:
    """Site effects from their independent normal conditionals; sites without
    sampling units are drawn from the prior."""
    ds = model.ds
    r = occupancy_eta(state, model) - state.eps[ds.unit_site]
    k = state.z - 0.5
    prec = np.bincount(ds.unit_site, weights=state.omega_psi, minlength=ds.S) + 1.0 / state.sigma_eps**2
    s = np.bincount(ds.unit_site, weights=k - state.omega_psi * r, minlength=ds.S)
    var = 1.0 / prec
    return var * s + np.sqrt(var) * rng.standard_normal(ds.S)


# ---------------------------------------------------------------------------
# temporal hyperparameters


def temporal_sufficient_stats(state: ModelState, model: Model):
    """Diagonal of X^Y' Omega X^Y and X^Y' z~ with z~ = k - c * omega."""
    ds = model.ds
    c = occupancy_eta(state, model, include_b=False)
    ztil = state.z - 0.5 - c * state.omega_psi
    D = np.bincount(ds.unit_year, weights=state.omega_psi, minlength=ds.Y)
    m = np.bincount(ds.unit_year, weights=ztil, minlength=ds.Y)
    return D, m


def temporal_log_marginal(l, sigma, w, D, m) -> float:
    """log of  |K|^-1/2 |D + K^-1|^-1/2 exp(m' (D + K^-1)^-1 m / 2).

    Evaluated through A = I + D^1/2 K D^1/2, which stays well defined for
    years with D = 0.  ``K`` is the jittered temporal kernel.
    """
    K = kernel_matrix(KernelParams(l, sigma), w)
    K, _, _ = factor_with_jitter(K, sigma**2, name="temporal kernel")
    sq = np.sqrt(D)
    A = np.eye(K.shape[0]) + sq[:, None] * K * sq[None, :]
    L = np.linalg.cholesky(A)
    Km = K @ m
    v = solve_triangular(L, sq * Km, lower=True)
    quad = m @ Km - v @ v
    return float(-np.log(np.diag(L)).sum() + 0.5 * quad)


def collapsed_log_likelihood(state: ModelState, model: Model, l=None, sigma=None) -> float:
    """log of the PG-augmented likelihood of z with b integrated out, including
    the b-free constant sum_j (k_j c_j - omega_j c_j^2 / 2)."""
    l = state.l_T if l is None else l
    sigma = state.sigma_T if sigma is None else sigma
    D, m = temporal_sufficient_stats(state, model)
    c = occupancy_eta(state, model, include_b=False)
    const = np.sum((state.z - 0.5) * c - 0.5 * state.omega_psi * c * c)
    return const + temporal_log_marginal(l, sigma, model.w, D, m)


def temporal_log_prior(log_l, log_sigma, priors: Priors) -> float:
    """Log prior density of (log l_T, log sigma_T), Jacobian included:
    Gamma(a_lT, rate b_lT) on l_T and IG(a_sigmaT, b_sigmaT) on sigma_T^2."""
    l = math.exp(log_l)
    s2 = math.exp(2 * log_sigma)
    lp_l = priors.a_lT * log_l - priors.b_lT * l
    lp_s = -priors.a_sigmaT * math.log(s2) - priors.b_sigmaT / s2
    return lp_l + lp_s


class TemporalMH:
    """Random-walk MH on (log l_T, log sigma_T), adapted during burn-in."""

    def __init__(self, step=0.5, adapt=True):
        self.scale = float(step)
        self.cov = np.eye(2)
        self.adapt = adapt
        self.history = []
        self.accepted = 0
        self.proposed = 0
        self._window_acc = 0
        self._window_n = 0

    def step(self, state, model, rng, D, m, burnin_phase):
        cur = np.array([math.log(state.l_T), math.log(state.sigma_T)])
        prop = cur + self.scale * (np.linalg.cholesky(self.cov) @ rng.standard_normal(2))
        u = rng.random()
        self.proposed += 1
        accept = False
        if self.scale > 0:
            try:
                lt_cur = temporal_log_prior(*cur, model.priors) + temporal_log_marginal(
                    state.l_T, state.sigma_T, model.w, D, m)
                lt_prop = temporal_log_prior(*prop, model.priors) + temporal_log_marginal(
                    math.exp(prop[0]), math.exp(prop[1]), model.w, D, m)
            except (IllConditionedError, LinAlgError, OverflowError):
                lt_prop = -np.inf
                lt_cur = 0.0
            if not np.isfinite(lt_prop):
                warnings.warn("non-finite temporal log-target at proposal; rejected", RuntimeWarning,
                              stacklevel=2)
            elif math.log(u) < lt_prop - lt_cur:
                accept = True
        if accept:
            self.accepted += 1
            cur = prop
        if burnin_phase and self.adapt and self.scale > 0:
            self._window_n += 1
            self._window_acc += accept
            self.history.append(cur.copy())
            if self._window_n == 50:
                rate = self._window_acc / 50
                if rate < 0.25:
                    self.scale *= 0.8
                elif rate > 0.40:
                    self.scale *= 1.25
                self._window_acc = self._window_n = 0
                if len(self.history) >= 200 and len(self.history) % 200 == 0:
                    h = np.array(self.history[-1000:])
                    C = np.cov(h.T) + 1e-6 * np.eye(2)
                    # normalise so the scale keeps its meaning
                    self.cov = C / np.sqrt(np.linalg.det(C))
        return math.exp(cur[0]), math.exp(cur[1])

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposed if self.proposed else float("nan")


def update_temporal_hypers(state: ModelState, model: Model, rng, mh: TemporalMH, burnin_phase=False):
    D, m = temporal_sufficient_stats(state, model)
    return mh.step(state, model, rng, D, m, burnin_phase)


# ---------------------------------------------------------------------------
# spatial and variance hyperparameters


def _ig_draw(shape, scale, rng):
    return scale / rng.gamma(shape)


def update_spatial_hypers(state: ModelState, model: Model, rng):
    """Grid draw of l_S given a~ and sigma_S, then sigma_S^2 | a~, l_S.

    Returns ``(ls_index, l_S, sigma_S)``.
    """
    if not model.M:
        return state.ls_index, state.l_S, state.sigma_S
    p = model.priors
    a = state.a_tilde
    M = model.M
    s2 = state.sigma_S**2
    quads = np.array([a @ Kinv @ a for Kinv in model.ls_inv])
    logw = -0.5 * (model.ls_logdet + M * math.log(s2)) - 0.5 * quads / s2
    logw += (p.a_lS - 1) * np.log(model.ls_grid) - p.b_lS * model.ls_grid
    idx = state.ls_index
    if np.isfinite(logw).any() and np.isfinite(logw.max()):
        w = np.exp(logw - logw.max())
        w /= w.sum()
        idx = int(rng.choice(w.size, p=w))
    else:
        warnings.warn("all l_S grid weights underflowed; keeping current value", RuntimeWarning, stacklevel=2)
    s2_new = _ig_draw(p.a_sigmaS + M / 2.0, p.b_sigmaS + quads[idx] / 2.0, rng)
    return idx, float(model.ls_grid[idx]), math.sqrt(s2_new)


def update_sigma_eps(state: ModelState, model: Model, rng) -> float:
    p = model.priors
    s2 = _ig_draw(p.a_eps + state.eps.size / 2.0, p.b_eps + state.eps @ state.eps / 2.0, rng)
    return math.sqrt(s2)


# ---------------------------------------------------------------------------
# latent occupancy and detection


def update_z(state: ModelState, model: Model, rng) -> np.ndarray:
    """z_j = 1 where a detection exists; otherwise Bernoulli with log-odds
    eta_psi + sum log(1 - p_i) over the unit's visits."""
    ds = model.ds
    eta_p = detection_eta(state, model)
    log_q = np.bincount(ds.unit, weights=log_expit(-eta_p), minlength=ds.J)
    prob = expit(occupancy_eta(state, model) + log_q)
    z = (rng.random(ds.J) < prob).astype(float)
    z[model.has_detection] = 1.0
    return z


def update_detection_block(state: ModelState, model: Model, rng, pool: _PgPool | None = None):
    """PG update of (u, beta_p) using only visits to occupied units, followed
    by the conjugate draws of (mu_p, sigma_p).

    Returns ``(u, beta_p, mu_p, sigma_p, omega_p)``; ``omega_p`` is NaN for
    visits to unoccupied units.
    """
    ds = model.ds
    p = model.priors
    rows = np.flatnonzero(state.z[ds.unit] > 0.5)
    eta = detection_eta(state, model, rows)
    om = pool.draw(eta, rng) if pool is not None else sample_pg1(eta, rng)
    omega_p = np.full(ds.N, np.nan)
    omega_p[rows] = om

    design = model.det_design.subset(rows)
    P, r = sparse_cross_products(design, om, ds.y[rows] - 0.5)
    pd_ = model.Xd.shape[1]
    q = pd_ + model.Yd
    Binv = np.zeros((q, q))
    Binv[:pd_, :pd_] = np.eye(pd_) / p.phi_p
    Binv[pd_:, pd_:] = np.eye(model.Yd) / state.sigma_p**2
    Bb = np.zeros(q)
    Bb[pd_:] = state.mu_p / state.sigma_p**2
    beta = gaussian_block_draw(P + Binv, r + Bb, rng, name="detection block")
    beta_p, u = beta[:pd_], beta[pd_:]

    mu_p, sigma_p = state.mu_p, state.sigma_p
    if not model.config.fix_detection_hyper:
        prec = 1.0 / p.sigma0_p**2 + model.Yd / sigma_p**2
        mean = (p.mu0_p / p.sigma0_p**2 + u.sum() / sigma_p**2) / prec
        mu_p = mean + rng.standard_normal() / math.sqrt(prec)
        ss = float(((u - mu_p) ** 2).sum())
        sigma_p = math.sqrt(_ig_draw(p.a_sigmap + model.Yd / 2.0, p.b_sigmap + ss / 2.0, rng))
    return u, beta_p, float(mu_p), float(sigma_p), omega_p


# ---------------------------------------------------------------------------
# derived quantities recorded every kept iteration


def psi_grid(state: ModelState, model: Model, years=None) -> np.ndarray:
    """Occupancy probability for every (year, site) pair, shape (Y, S)."""
    ds = model.ds
    Xg = model.grid_design()
    yrs = np.arange(ds.Y) if years is None else np.asarray(years)
    eta = state.mu_psi + state.b[yrs][:, None] + state.eps[None, :]
    if model.M:
        eta = eta + state.a_tilde[model.site_cell][None, :]
    if Xg.shape[2]:
        eta = eta + Xg[yrs] @ state.beta_psi
    return expit(eta)


def gof_replicate(state: ModelState, model: Model, rng):
    """Replicate detections y~ ~ Be(p z) tallied by year and by grid region."""
    ds = model.ds
    p = expit(detection_eta(state, model)) * state.z[ds.unit]
    ytil = (rng.random(ds.N) < p).astype(float)
    t1 = np.bincount(ds.obs_year, weights=ytil, minlength=ds.Y)
    t2 = np.bincount(model.site_cell[ds.obs_site], weights=ytil, minlength=model.grid.n_centers)
    return t1.astype(np.int64), t2.astype(np.int64)


def observed_gof(model: Model):
    ds = model.ds
    t1 = np.bincount(ds.obs_year, weights=ds.y, minlength=ds.Y).astype(np.int64)
    t2 = np.bincount(model.site_cell[ds.obs_site], weights=ds.y,
                     minlength=model.grid.n_centers).astype(np.int64)
    return t1, t2


# ---------------------------------------------------------------------------
# driver


def initial_state(model: Model, rng) -> ModelState:
    ds = model.ds
    p = model.priors
    z = np.where(model.has_detection, 1.0, (rng.random(ds.J) < 0.5).astype(float))
    lT = _gamma_median(p.a_lT, p.b_lT)
    idx = len(model.ls_grid) // 2
    return ModelState(
        mu_psi=p.mu0_psi,
        beta_psi=np.zeros(model.Xc.shape[1]),
        b=np.zeros(ds.Y),
        a_tilde=np.zeros(model.M),
        eps=np.zeros(ds.S),
        u=np.full(model.Yd, p.mu0_p),
        beta_p=np.zeros(model.Xd.shape[1]),
        z=z,
        omega_psi=np.full(ds.J, 0.25),
        omega_p=np.full(ds.N, np.nan),
        sigma_T=math.sqrt(p.b_sigmaT / (p.a_sigmaT - 1)) if p.a_sigmaT > 1 else 1.0,
        l_T=lT,
        sigma_S=math.sqrt(p.b_sigmaS / (p.a_sigmaS - 1)) if p.a_sigmaS > 1 else 1.0,
        l_S=float(model.ls_grid[idx]),
        sigma_eps=math.sqrt(p.b_eps / (p.a_eps - 1)) if p.a_eps > 1 else 1.0,
        mu_p=p.mu0_p,
        sigma_p=math.sqrt(p.b_sigmap / (p.a_sigmap - 1)) if p.a_sigmap > 1 else 1.0,
        ls_index=idx,
    )


def _gamma_median(shape, rate):
    from scipy.stats import gamma
    return float(gamma.median(shape, scale=1.0 / rate))


def gibbs_iteration(state: ModelState, model: Model, rng, mh: TemporalMH, pool=None, burnin_phase=False):
    """Run one full sweep, updating ``state`` in place."""
    state.omega_psi = update_omega_psi(state, model, rng, pool)
    state.l_T, state.sigma_T = update_temporal_hypers(state, model, rng, mh, burnin_phase)
    state.mu_psi, state.beta_psi, state.b, state.a_tilde = update_occupancy_block(state, model, rng)
    state.eps = update_eps(state, model, rng)
    state.ls_index, state.l_S, state.sigma_S = update_spatial_hypers(state, model, rng)
    state.sigma_eps = update_sigma_eps(state, model, rng)
    state.z = update_z(state, model, rng)
    state.u, state.beta_p, state.mu_p, state.sigma_p, state.omega_p = update_detection_block(
        state, model, rng, pool)
    return state


def run_chain(ds: Dataset, priors: Priors | None = None, config: McmcConfig | None = None,
              seed: int | None = None, progress=None):
    """Fit the model and return a :class:`pgocc.posterior.ChainOutput`."""
    from .posterior import ChainOutput

    config = config or McmcConfig()
    if seed is not None:
        config = McmcConfig(**{**asdict(config), "seed": seed})
    if config.thin < 1 or config.iterations < 0 or config.burnin < 0:
        raise ValueError("iterations/burnin must be >= 0 and thin >= 1")
    t0 = time.perf_counter()
    model = Model(ds, priors, config)
    rng = np.random.default_rng(config.seed)
    state = initial_state(model, rng)
    mh = TemporalMH(config.mh_step, config.adapt)
    pool = _PgPool(config.threads, config.chunk_size)

    map_years = np.arange(ds.Y) if config.map_years is None else np.asarray(config.map_years, dtype=int)
    n_keep = config.iterations // config.thin
    rec = _Recorder(model, n_keep, map_years)
    t_setup = time.perf_counter() - t0

    total = config.burnin + config.iterations
    t1 = time.perf_counter()
    try:
        for it in range(total):
            burn = it < config.burnin
            try:
                gibbs_iteration(state, model, rng, mh, pool, burnin_phase=burn)
            except Exception as exc:
                raise SamplerError(f"iteration {it}: {exc}") from exc
            if not burn and (it - config.burnin + 1) % config.thin == 0:
                rec.record(state, rng)
            if progress is not None:
                progress(it, total)
    finally:
        pool.close()
    elapsed = time.perf_counter() - t1

    meta = {
        "config": asdict(config),
        "priors": asdict(model.priors),
        "seed": config.seed,
        "N": ds.N, "J": ds.J, "S": ds.S, "Y": ds.Y, "M": model.grid.n_centers,
        "spatial_effects": int(model.M),
        "ls_grid": model.ls_grid.tolist(),
        "occ_names": list(ds.occ_names),
        "det_names": list(ds.det_names),
        "temporal_mh_acceptance": mh.acceptance_rate,
        "temporal_mh_scale": mh.scale,
        "timing": {
            "setup_seconds": t_setup,
            "sampling_seconds": elapsed,
            "seconds_per_iteration": elapsed / total if total else float("nan"),
        },
    }
    return ChainOutput.from_recorder(rec, model, meta, state)


class _Recorder:
    def __init__(self, model: Model, n_keep, map_years):
        ds = model.ds
        self.model = model
        self.n = 0
        self.map_years = map_years
        self.draws = {k: np.empty(n_keep) for k in SCALARS}
        self.draws["beta_psi"] = np.empty((n_keep, model.Xc.shape[1]))
        self.draws["b"] = np.empty((n_keep, ds.Y))
        self.draws["a_tilde"] = np.empty((n_keep, model.M))
        self.draws["u"] = np.empty((n_keep, model.Yd))
        self.draws["beta_p"] = np.empty((n_keep, model.Xd.shape[1]))
        self.index = np.empty((n_keep, ds.Y))
        self.psi = np.empty((n_keep, map_years.size, ds.S), dtype=np.float32)
        self.gof_year = np.empty((n_keep, ds.Y), dtype=np.int64)
        self.gof_region = np.empty((n_keep, model.grid.n_centers), dtype=np.int64)

    def record(self, state: ModelState, rng):
        i = self.n
        for k in SCALARS:
            self.draws[k][i] = getattr(state, k)
        for k in ("beta_psi", "b", "a_tilde", "u", "beta_p"):
            self.draws[k][i] = getattr(state, k)
        psi = psi_grid(state, self.model)
        self.index[i] = psi.mean(axis=1)
        self.psi[i] = psi[self.map_years]
        self.gof_year[i], self.gof_region[i] = gof_replicate(state, self.model, rng)
        self.n += 1
