"""Delimited-text outputs of a fitted chain."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data_model import Dataset, detection_season_design
from .posterior import ChainOutput, _json_default, credible_interval, gof_report
from .sampler import SCALARS

FLOAT_FMT = "{:.10g}"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _band(draws, level):
    lo, hi = credible_interval(draws, level)
    return np.median(draws, axis=0), lo, hi


def write_occupancy_index(chain: ChainOutput, out, level=0.95):
    med, lo, hi = _band(chain.index_draws, level)
    return write_table(Path(out) / "occupancy_index.csv", ["year", "median", "lower", "upper"],
                       zip(chain.years, med, lo, hi))


def write_site_probs(chain: ChainOutput, ds: Dataset, out):
    paths = []
    for k, t in enumerate(chain.map_years):
        psi = chain.psi_draws[:, k, :].astype(float)
        med = np.median(psi, axis=0)
        sd = psi.std(axis=0, ddof=1) if psi.shape[0] > 1 else np.zeros(psi.shape[1])
        rows = zip(ds.site_ids, ds.coords[:, 0], ds.coords[:, 1], med, sd)
        paths.append(write_table(Path(out) / f"site_probs_{int(chain.years[t])}.csv",
                                 ["site", "easting", "northing", "median", "sd"], rows))
    return paths


def write_detection_trend(chain: ChainOutput, out, level=0.95):
    """Yearly detection probability with every covariate at its mean."""
    u = chain.draws["u"]
    if u.shape[1] == 1:
        u = np.repeat(u, chain.years.size, axis=1)
    med, lo, hi = _band(expit(u), level)
    return write_table(Path(out) / "detection_trend.csv", ["year", "median", "lower", "upper"],
                       zip(chain.years, med, lo, hi))


def write_detection_season(chain: ChainOutput, ds: Dataset, out, level=0.95):
    """Detection probability across the calendar year, using the per-draw mean
    of the yearly detection effects and mean list length."""
    days = np.arange(1, 367)
    X = detection_season_design(ds, days)
    eta = chain.draws["u"].mean(axis=1)[:, None] + chain.draws["beta_p"] @ X.T
    med, lo, hi = _band(expit(eta), level)
    return write_table(Path(out) / "detection_season.csv", ["julian_day", "median", "lower", "upper"],
                       zip(days, med, lo, hi))


def write_gof(chain: ChainOutput, out):
    rep = gof_report(chain)
    cols = ["observed", "median", "lower_95", "upper_95", "lower_99", "upper_99", "class"]
    y = rep["year"]
    p1 = write_table(Path(out) / "gof_year.csv", ["year"] + cols,
                     zip(chain.years, *(y[c] for c in cols)))
    r = rep["region"]
    centers = chain.region_centers
    p2 = write_table(Path(out) / "gof_region.csv", ["region", "center_easting", "center_northing"] + cols,
                     zip(range(len(r["class"])), centers[:, 0], centers[:, 1], *(r[c] for c in cols)))
    return p1, p2, rep


def write_traces(chain: ChainOutput, out):
    paths = []
    for name in SCALARS:
        x = chain.draws[name]
        paths.append(write_table(Path(out) / f"trace_{name}.csv", ["draw", name], zip(range(x.size), x)))
    return paths


def write_run_log(meta: dict, out):
    path = Path(out) / "run_log.json"
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True, default=_json_default)
    return path


def write_all(chain: ChainOutput, ds: Dataset, out) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_occupancy_index(chain, out)]
    paths += write_site_probs(chain, ds, out)
    paths.append(write_detection_trend(chain, out))
    paths.append(write_detection_season(chain, ds, out))
    if chain.n_draws:
        paths += list(write_gof(chain, out)[:2])
    paths += write_traces(chain, out)
    return paths
