"""Synthetic occupancy data with known truth, for timing, recovery and
coverage studies."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import data_model
from .data_model import Dataset, IngestOptions
from .gp_kernel import KernelParams, factor_with_jitter, kernel_matrix


@dataclass
class SimConfig:
    S: int = 500
    Y: int = 15
    first_year: int = 2000
    visit_model: str = "poisson"      # "poisson" | "one_plus_poisson"
    visit_mean: float = 2.0
    visit_prob: float = 1.0           # probability a site is surveyed in a given year
    mu_psi: float = -1.0
    sigma_eps: float = 0.5
    u: float | tuple = -1.0           # detection log-odds, scalar or one per year
    sigma_T: float = 0.2
    l_T: float = 1.0                  # in years
    sigma_S: float = 0.0
    l_S: float = 50.0                 # in map units
    bbox: tuple = (0.0, 0.0, 200.0, 200.0)   # xmin, ymin, xmax, ymax (km)
    list_length_mean: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.S < 1 or self.Y < 1:
            raise ValueError("S and Y must be >= 1")
        if not 0.0 <= self.visit_prob <= 1.0:
            raise ValueError("visit_prob must lie in [0, 1]")
        if self.visit_mean <= 0 and self.visit_model == "poisson":
            raise ValueError("visit_mean must be positive")
        if self.visit_model not in ("poisson", "one_plus_poisson"):
            raise ValueError(f"unknown visit model {self.visit_model!r}")
        if min(self.sigma_eps, self.sigma_T, self.sigma_S) < 0:
            raise ValueError("standard deviations must be >= 0")


def _timing(S):
    return SimConfig(S=S, Y=15, visit_model="poisson", visit_mean=2.0, mu_psi=-1.0, sigma_eps=0.5,
                     u=-1.0, sigma_T=0.2, l_T=1.0, sigma_S=0.0)


# sparse-spatial settings are given on the unit square with l_S = 0.25; here
# the square is 200 km wide so l_S becomes 50 km and the default 20 km grid
# gives 10 x 10 cells.
def _sparse(S=10_000, Y=40):
    return SimConfig(S=S, Y=Y, visit_model="one_plus_poisson", visit_mean=0.5, visit_prob=0.05,
                     mu_psi=0.0, sigma_eps=0.0, u=-1.0, sigma_T=0.2, l_T=1.0, sigma_S=0.5, l_S=50.0)


PRESETS = {
    "supp-2.1-s500": lambda: _timing(500),
    "supp-2.1-s1000": lambda: _timing(1000),
    "supp-2.1-s2500": lambda: _timing(2500),
    "supp-2.1-s5000": lambda: _timing(5000),
    "supp-2.2": lambda: _sparse(),
    "supp-2.2-s2000-y20": lambda: _sparse(2000, 20),
}
TIMING_PRESETS = ("supp-2.1-s500", "supp-2.1-s1000", "supp-2.1-s2500", "supp-2.1-s5000")


def preset(name: str, **overrides) -> SimConfig:
    try:
        cfg = PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides)


def _gp_draw(params: KernelParams, pts, rng):
    K = kernel_matrix(params, pts)
    _, cho, _ = factor_with_jitter(K, params.sigma**2, name="simulation GP")
    L = np.tril(cho[0])
    return L @ rng.standard_normal(L.shape[0])


def _distinct_days(unit_key, rng):
    """Visit days in 1..365, distinct within each sampling unit."""
    jd = rng.integers(1, 366, unit_key.size)
    while True:
        key = unit_key.astype(np.int64) * 400 + jd
        _, first = np.unique(key, return_index=True)
        dup = np.ones(key.size, dtype=bool)
        dup[first] = False
        if not dup.any():
            return jd
        jd[dup] = rng.integers(1, 366, int(dup.sum()))


def generate(config: SimConfig, options: IngestOptions | None = None):
    """Simulate a dataset and its generating truth.

    Returns ``(dataset, truth)``; ``truth`` holds the effects, the occupancy
    probability of every (year, site) pair and the true occupancy index.
    """
    rng = np.random.default_rng(config.seed)
    S, Y = config.S, config.Y
    x0, y0, x1, y1 = config.bbox
    coords = np.column_stack([rng.uniform(x0, x1, S), rng.uniform(y0, y1, S)])
    years = config.first_year + np.arange(Y)

    b = (_gp_draw(KernelParams(config.l_T, config.sigma_T), np.arange(Y, dtype=float), rng)
         if config.sigma_T > 0 else np.zeros(Y))
    a = _gp_draw(KernelParams(config.l_S, config.sigma_S), coords, rng) if config.sigma_S > 0 else np.zeros(S)
    eps = config.sigma_eps * rng.standard_normal(S)
    u = np.broadcast_to(np.asarray(config.u, dtype=float), (Y,)).copy()

    logit_psi = config.mu_psi + b[:, None] + a[None, :] + eps[None, :]
    psi = expit(logit_psi)                                   # (Y, S)

    surveyed = rng.random((Y, S)) < config.visit_prob
    if config.visit_model == "poisson":
        nvis = rng.poisson(config.visit_mean, (Y, S))
    else:
        nvis = 1 + rng.poisson(config.visit_mean, (Y, S))
    nvis = np.where(surveyed, nvis, 0)
    z_all = (rng.random((Y, S)) < psi).astype(np.int8)

    # visits ordered site-major then year, so indices follow a natural order
    t_idx, s_idx = np.nonzero(nvis)
    order = np.lexsort((t_idx, s_idx))
    t_idx, s_idx = t_idx[order], s_idx[order]
    reps = nvis[t_idx, s_idx]
    obs_t = np.repeat(t_idx, reps)
    obs_s = np.repeat(s_idx, reps)
    n = obs_t.size
    if n == 0:
        raise ValueError("simulation produced no visits; increase visit_prob or visit_mean")
    p = expit(u[obs_t])
    y = (rng.random(n) < p * z_all[obs_t, obs_s]).astype(np.int8)
    jd = _distinct_days(obs_t * S + obs_s, rng)
    ll = 1 + rng.poisson(config.list_length_mean - 1, n) if config.list_length_mean > 1 else np.ones(n)

    if y.sum() == 0:
        raise ValueError("simulation produced no detections")
    site_ids = np.array([f"S{s:06d}" for s in range(S)])[obs_s]
    ds = data_model.from_arrays(site_ids, coords[obs_s], years[obs_t], jd, y, list_length=ll,
                                options=options or IngestOptions())
    # map truth into dataset site order (sites without visits are absent from ds)
    site_order = np.array([int(s[1:]) for s in ds.site_ids])
    truth = {
        "config": asdict(config),
        "years": years,
        "site_order": site_order,
        "b": b, "a": a, "eps": eps, "u": u,
        "psi": psi,
        "index": psi.mean(axis=1),
        "z": z_all,
        "coords": coords,
    }
    return ds, truth


def truth_for_dataset(truth: dict, ds: Dataset) -> dict:
    """Truth restricted and reordered to the dataset's site indexing."""
    order = truth["site_order"]
    out = dict(truth)
    out["psi"] = truth["psi"][:, order]
    out["a"] = truth["a"][order]
    out["eps"] = truth["eps"][order]
    out["index"] = out["psi"].mean(axis=1)
    return out


def write_truth(truth: dict, path) -> None:
    def conv(v):
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (np.integer, np.floating)):
            return v.item()
        if isinstance(v, tuple):
            return list(v)
        return v

    with open(path, "w") as f:
        json.dump({k: conv(v) for k, v in truth.items() if k != "z"}, f, default=conv)


def score_recovery(chain, truth: dict, year: int = 0, level: float = 0.95, site_cell=None) -> dict:
    """Coverage of the occupancy index and per-site occupancy probabilities,
    plus RMSE of posterior-median spatial effects.

    ``truth`` must already be in the dataset's site order (see
    :func:`truth_for_dataset`).  ``year`` is a year index that must be one of
    the chain's stored map years.  ``site_cell`` (site -> grid cell) enables
    the spatial-effect RMSE.
    """
    from .posterior import credible_interval

    true_index = np.asarray(truth["index"])
    if true_index.shape[0] != chain.index_draws.shape[1]:
        raise ValueError("truth and chain have different numbers of years")
    lo, hi = credible_interval(chain.index_draws, level)
    index_cover = (lo <= true_index) & (true_index <= hi)

    out = {"index_covered": index_cover, "index_coverage": float(index_cover.mean()),
           "index_years_covered": int(index_cover.sum())}

    map_years = list(np.asarray(chain.map_years))
    if year in map_years and chain.psi_draws.size:
        k = map_years.index(year)
        psi_true = np.asarray(truth["psi"])[year]
        if psi_true.shape[0] != chain.psi_draws.shape[2]:
            raise ValueError("truth and chain have different numbers of sites")
        lo, hi = credible_interval(chain.psi_draws[:, k, :].astype(float), level)
        cov = (lo <= psi_true) & (psi_true <= hi)
        out["site_psi_coverage"] = float(cov.mean())

    a_draws = chain.draws.get("a_tilde")
    if a_draws is not None and a_draws.size and site_cell is not None:
        est = np.median(a_draws, axis=0)[np.asarray(site_cell)]
        out["spatial_rmse"] = float(np.sqrt(np.mean((est - np.asarray(truth["a"])) ** 2)))
    return out
