"""Posterior summaries, occupancy index, and posterior-predictive checks."""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sampler import Model, ModelState, gof_replicate, psi_grid

INSIDE_95 = "inside-95"
BETWEEN = "between-95-99"
OUTSIDE_99 = "outside-99"


@dataclass
class ChainOutput:
    draws: dict                      # name -> (n_draws, ...) arrays
    index_draws: np.ndarray          # (n_draws, Y)
    gof_year: np.ndarray             # (n_draws, Y) replicate T1
    gof_region: np.ndarray           # (n_draws, M_regions) replicate T2
    observed_year: np.ndarray        # (Y,)
    observed_region: np.ndarray      # (M_regions,)
    psi_draws: np.ndarray            # (n_draws, n_map_years, S) float32
    map_years: np.ndarray            # year indices of psi_draws
    years: np.ndarray                # calendar years
    region_centers: np.ndarray       # (M_regions, 2)
    metadata: dict = field(default_factory=dict)
    final_state: ModelState | None = None

    @property
    def n_draws(self) -> int:
        return self.index_draws.shape[0]

    @classmethod
    def from_recorder(cls, rec, model: Model, meta, state):
        t1, t2 = _observed(model)
        return cls(
            draws=rec.draws, index_draws=rec.index, gof_year=rec.gof_year, gof_region=rec.gof_region,
            observed_year=t1, observed_region=t2, psi_draws=rec.psi, map_years=rec.map_years,
            years=model.ds.years.copy(), region_centers=model.grid.centers.copy(),
            metadata=meta, final_state=state,
        )

    def save(self, path) -> None:
        """Write an ``.npz`` archive whose bytes depend only on the draws.

        Wall-clock timings and the thread count, which does not affect the
        draws, are left out of the stored metadata, and every zip entry carries
        a fixed timestamp.
        """
        meta = {k: v for k, v in self.metadata.items() if k != "timing"}
        if "config" in meta:
            meta["config"] = {k: v for k, v in meta["config"].items() if k != "threads"}
        arrays = {f"draw__{k}": v for k, v in sorted(self.draws.items())}
        arrays.update(index_draws=self.index_draws, gof_year=self.gof_year, gof_region=self.gof_region,
                      observed_year=self.observed_year, observed_region=self.observed_region,
                      psi_draws=self.psi_draws, map_years=self.map_years, years=self.years,
                      region_centers=self.region_centers,
                      metadata=np.array(json.dumps(meta, sort_keys=True, default=_json_default)))
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
                info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, buf.getvalue())

    @classmethod
    def load(cls, path) -> "ChainOutput":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"chain file not found: {path}")
        with np.load(path, allow_pickle=False) as f:
            data = {k: f[k] for k in f.files}
        required = ("index_draws", "gof_year", "gof_region", "observed_year", "observed_region")
        for key in required:
            if key not in data:
                raise KeyError(f"chain file {path} lacks field {key!r}")
        draws = {k[len("draw__"):]: v for k, v in data.items() if k.startswith("draw__")}
        return cls(draws=draws, index_draws=data["index_draws"], gof_year=data["gof_year"],
                   gof_region=data["gof_region"], observed_year=data["observed_year"],
                   observed_region=data["observed_region"], psi_draws=data["psi_draws"],
                   map_years=data["map_years"], years=data["years"],
                   region_centers=data["region_centers"],
                   metadata=json.loads(str(data["metadata"])))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def _observed(model: Model):
    from .sampler import observed_gof
    return observed_gof(model)


def occupancy_index(state: ModelState, model: Model) -> np.ndarray:
    """Mean occupancy probability over all S sites, for every year."""
    return psi_grid(state, model).mean(axis=1)


def gof_replicates(state: ModelState, model: Model, rng):
    """Yearly (T1) and per-region (T2) detection totals of one replicate."""
    return gof_replicate(state, model, rng)


# ---------------------------------------------------------------------------
# effective sample size


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation of a 1-D chain, computed by FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        return np.ones(1)
    return acov / acov[0]


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial monotone positive-pair sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float(n)
    if np.ptp(x) == 0:
        return float(n)
    rho = autocorrelation(x)
    # pair sums Gamma_k = rho_2k + rho_2k+1
    npairs = n // 2
    gam = rho[: 2 * npairs].reshape(npairs, 2).sum(axis=1)
    pos = np.flatnonzero(gam <= 0)
    m = pos[0] if pos.size else npairs
    gam = np.minimum.accumulate(gam[:m])
    tau = -1.0 + 2.0 * gam.sum()
    tau = max(tau, 1.0 / np.log10(max(n, 10)))
    return float(n / tau)


# ---------------------------------------------------------------------------
# summaries


def credible_interval(draws, level=0.95, axis=0):
    a = (1.0 - level) / 2.0
    return np.quantile(draws, [a, 1.0 - a], axis=axis)


def _flatten(chain: ChainOutput):
    out = {}
    for name, arr in chain.draws.items():
        arr = np.asarray(arr)
        if arr.ndim == 1:
            out[name] = arr
        else:
            for j in range(arr.shape[1]):
                out[f"{name}[{j}]"] = arr[:, j]
    for t, yr in enumerate(chain.years):
        out[f"index[{int(yr)}]"] = chain.index_draws[:, t]
    return out


def summarize(chain: ChainOutput, levels=(0.95,)) -> list[dict]:
    """Per-quantity median, equal-tailed intervals and ESS.

    Returns a list of row dicts with keys ``quantity``, ``median``, ``ess`` and
    ``lower_<pct>`` / ``upper_<pct>`` per requested level.
    """
    if chain.n_draws == 0:
        raise ValueError("cannot summarise an empty chain")
    rows = []
    for name, x in _flatten(chain).items():
        row = {"quantity": name, "median": float(np.median(x))}
        for lev in levels:
            lo, hi = credible_interval(x, lev)
            pct = f"{lev * 100:g}"
            row[f"lower_{pct}"] = float(lo)
            row[f"upper_{pct}"] = float(hi)
        row["ess"] = effective_sample_size(x)
        rows.append(row)
    return rows


def summarize_draws(x, levels=(0.95,)) -> dict:
    """Summary of one scalar chain (median, intervals, ESS)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("cannot summarise an empty chain")
    row = {"median": float(np.median(x)), "ess": effective_sample_size(x)}
    for lev in levels:
        lo, hi = credible_interval(x, lev)
        row[f"lower_{lev * 100:g}"] = float(lo)
        row[f"upper_{lev * 100:g}"] = float(hi)
    return row


def classify(observed, replicates) -> list[str]:
    """Place each observed statistic relative to the 95% and 99% intervals of
    its replicate distribution (replicates: (n_draws, n_stats))."""
    replicates = np.asarray(replicates, dtype=float)
    lo95, hi95 = credible_interval(replicates, 0.95)
    lo99, hi99 = credible_interval(replicates, 0.99)
    out = []
    for o, a, b, c, d in zip(np.asarray(observed, float), lo95, hi95, lo99, hi99):
        if a <= o <= b:
            out.append(INSIDE_95)
        elif c <= o <= d:
            out.append(BETWEEN)
        else:
            out.append(OUTSIDE_99)
    return out


def gof_report(chain: ChainOutput, observed_year=None, observed_region=None) -> dict:
    """Three-way classification of the yearly and regional detection totals."""
    if chain.gof_year.shape[0] == 0:
        raise ValueError("chain has no GoF replicate draws (field 'gof_year' is empty)")
    oy = chain.observed_year if observed_year is None else observed_year
    orr = chain.observed_region if observed_region is None else observed_region
    report = {}
    for key, obs, rep in (("year", oy, chain.gof_year), ("region", orr, chain.gof_region)):
        cls = classify(obs, rep)
        lo95, hi95 = credible_interval(rep, 0.95)
        lo99, hi99 = credible_interval(rep, 0.99)
        report[key] = {
            "observed": np.asarray(obs),
            "median": np.median(rep, axis=0),
            "lower_95": lo95, "upper_95": hi95, "lower_99": lo99, "upper_99": hi99,
            "class": cls,
            "inside_95_fraction": float(np.mean([c == INSIDE_95 for c in cls])) if cls else float("nan"),
        }
    return report
