"""Visit-level records, sampling units, and the occupancy/detection designs.

A dataset is one row per visit.  Sampling units are the distinct (site, year)
pairs that received at least one visit; sites, units and years get contiguous
zero-based indices in order of first appearance (years are sorted).
"""
from __future__ import annotations

import datetime as _dt
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

REQUIRED = ("site_id", "easting", "northing", "year", "julian_day", "detected")
OPTIONAL = ("list_length",)
OCC_PREFIX = "occ_"
DET_PREFIX = "det_"


class DataError(ValueError):
    """Malformed or degenerate input data."""


class ConstantColumnError(DataError):
    def __init__(self, name):
        super().__init__(f"covariate column {name!r} is constant (zero standard deviation)")
        self.column = name


@dataclass
class IngestOptions:
    radius_km: float = 50.0
    filter_months: bool = False
    interactions: bool = True
    use_list_length: bool = True
    delimiter: str = ","
    # canonical column name -> name in the file
    columns: dict = field(default_factory=dict)


@dataclass
class Dataset:
    """Visits, sampling units, sites and years, plus the standardized designs.

    Observation arrays have length N, unit arrays length J.  ``X_det`` and
    ``X_occ`` may be ``None`` until :func:`build_designs` has run.
    """

    site_ids: np.ndarray          # (S,) str
    coords: np.ndarray            # (S, 2) easting, northing
    years: np.ndarray             # (Y,) calendar years, sorted
    obs_site: np.ndarray          # (N,)
    obs_year: np.ndarray          # (N,)
    julian_day: np.ndarray        # (N,)
    y: np.ndarray                 # (N,) 0/1
    unit: np.ndarray              # (N,) k_i
    unit_site: np.ndarray         # (J,) s_j
    unit_year: np.ndarray         # (J,) t_j
    list_length: np.ndarray | None = None      # (N,)
    occ_extra: dict = field(default_factory=dict)  # name -> (N,) raw visit values
    det_extra: dict = field(default_factory=dict)
    X_det: np.ndarray | None = None
    det_names: tuple = ()
    X_occ: np.ndarray | None = None
    occ_names: tuple = ()
    standardization: dict = field(default_factory=dict)  # name -> (mean, sd)
    options: IngestOptions = field(default_factory=IngestOptions)

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def J(self):
        return self.unit_site.shape[0]

    @property
    def S(self):
        return self.coords.shape[0]

    @property
    def Y(self):
        return self.years.shape[0]

    def summary(self) -> str:
        return f"N={self.N} J={self.J} S={self.S} Y={self.Y}"


def standardize(x, name="column"):
    """Return (z, mean, sd) with population sd; constant columns raise."""
    x = np.asarray(x, dtype=float)
    m = x.mean()
    sd = x.std()
    if not sd > 1e-12 * max(1.0, abs(m)):
        raise ConstantColumnError(name)
    return (x - m) / sd, m, sd


def from_arrays(site_ids, coords, years, julian_day, detected, list_length=None,
                occ_extra=None, det_extra=None, options=None, build=True) -> Dataset:
    """Assemble a dataset from per-visit arrays.

    ``site_ids`` may repeat; ``coords`` holds per-visit (easting, northing) and
    the first occurrence of each site fixes its location.
    """
    options = options or IngestOptions()
    site_ids = np.asarray(site_ids).astype(str)
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    years_raw = np.asarray(years, dtype=np.int64)
    n = site_ids.shape[0]
    if n == 0:
        raise DataError("no observations")

    uniq_sites, first_site, obs_site = _first_appearance(site_ids)
    year_vals, obs_year = np.unique(years_raw, return_inverse=True)
    pair = obs_site.astype(np.int64) * year_vals.size + obs_year
    _, first_unit, unit = _first_appearance(pair)

    ds = Dataset(
        site_ids=uniq_sites,
        coords=coords[first_site],
        years=year_vals,
        obs_site=obs_site,
        obs_year=obs_year.ravel(),
        julian_day=np.asarray(julian_day, dtype=np.int64),
        y=np.asarray(detected, dtype=np.int8),
        unit=unit,
        unit_site=obs_site[first_unit],
        unit_year=obs_year.ravel()[first_unit],
        list_length=None if list_length is None else np.asarray(list_length, dtype=float),
        occ_extra={k: np.asarray(v, float) for k, v in (occ_extra or {}).items()},
        det_extra={k: np.asarray(v, float) for k, v in (det_extra or {}).items()},
        options=options,
    )
    validate(ds)
    return build_designs(ds) if build else ds


def _first_appearance(values):
    """Unique values ordered by first appearance, their first index, and the
    inverse map."""
    uniq, first, inverse = np.unique(values, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    return uniq[order], first[order], relabel[inverse.ravel()]


def validate(ds: Dataset) -> None:
    """Check index integrity and value domains; raise DataError on failure."""
    if ds.N == 0:
        raise DataError("no observations")
    if not np.isin(ds.y, (0, 1)).all():
        raise DataError("detected must be 0/1")
    for name, idx, bound in (("unit", ds.unit, ds.J), ("obs_site", ds.obs_site, ds.S),
                             ("obs_year", ds.obs_year, ds.Y), ("unit_site", ds.unit_site, ds.S),
                             ("unit_year", ds.unit_year, ds.Y)):
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise DataError(f"{name} index out of range")
    if not np.array_equal(ds.unit_site[ds.unit], ds.obs_site) or \
            not np.array_equal(ds.unit_year[ds.unit], ds.obs_year):
        raise DataError("observation/unit site-year mismatch")
    pairs = ds.unit_site.astype(np.int64) * ds.Y + ds.unit_year
    if np.unique(pairs).size != ds.J:
        raise DataError("duplicate (site, year) sampling unit")
    if not np.all(np.isfinite(ds.coords)):
        raise DataError("non-finite site coordinates")
    if ds.list_length is not None and np.any(ds.list_length < 1):
        raise DataError("list_length must be >= 1")


def ingest(path, options: IngestOptions | None = None) -> Dataset:
    """Read a visit CSV and build a dataset with standardized designs."""
    options = options or IngestOptions()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    df = pd.read_csv(path, sep=options.delimiter, dtype=str, keep_default_na=False)
    colmap = {c: options.columns.get(c, c) for c in REQUIRED + OPTIONAL}
    missing = [colmap[c] for c in REQUIRED if colmap[c] not in df.columns]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")
    if len(df) == 0:
        raise DataError(f"{path}: zero observations")

    def numeric(canon, integer=False):
        vals = _parse_floats(df[colmap[canon]])
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            rows = ", ".join(str(r + 2) for r in bad[:10])  # +1 header, +1 one-based
            raise DataError(f"{path}: unparsable or missing {colmap[canon]!r} at row(s) {rows}")
        if integer and np.any(vals != np.round(vals)):
            raise DataError(f"{path}: non-integer values in {colmap[canon]!r}")
        return vals

    site = df[colmap["site_id"]].str.strip().to_numpy()
    empty = np.flatnonzero(site == "")
    if empty.size:
        raise DataError(f"{path}: missing site_id at row(s) {', '.join(str(r + 2) for r in empty[:10])}")
    easting, northing = numeric("easting"), numeric("northing")
    year = numeric("year", integer=True).astype(np.int64)
    jd = numeric("julian_day", integer=True).astype(np.int64)
    det = numeric("detected", integer=True).astype(np.int64)
    bad = np.flatnonzero((det != 0) & (det != 1))
    if bad.size:
        raise DataError(f"{path}: detected must be 0/1, row(s) {', '.join(str(r + 2) for r in bad[:10])}")
    bad = np.flatnonzero((jd < 1) | (jd > 366))
    if bad.size:
        raise DataError(f"{path}: julian_day outside 1..366 at row(s) {', '.join(str(r + 2) for r in bad[:10])}")
    ll = None
    if colmap["list_length"] in df.columns and options.use_list_length:
        ll = numeric("list_length")
        bad = np.flatnonzero(ll < 1)
        if bad.size:
            raise DataError(f"{path}: list_length < 1 at row(s) {', '.join(str(r + 2) for r in bad[:10])}")
    occ_extra = {c: numeric_col(df, c, path) for c in df.columns if c.startswith(OCC_PREFIX)}
    det_extra = {c: numeric_col(df, c, path) for c in df.columns if c.startswith(DET_PREFIX)}

    keep = np.ones(len(df), dtype=bool)
    if options.filter_months:
        keep = _month_filter(year, jd, det)
        log.info("month filter kept %d of %d visits", keep.sum(), keep.size)
    if det[keep].sum() == 0:
        raise DataError(f"{path}: no detections of the focal species")

    dup = pd.DataFrame({"s": site, "y": year, "d": jd, "det": det})[keep].duplicated()
    if dup.any():
        warnings.warn(f"{int(dup.sum())} exact duplicate (site, year, day, detected) rows kept as repeat visits",
                      stacklevel=2)

    ds = from_arrays(
        site[keep], np.column_stack([easting, northing])[keep], year[keep], jd[keep], det[keep],
        list_length=None if ll is None else ll[keep],
        occ_extra={k: v[keep] for k, v in occ_extra.items()},
        det_extra={k: v[keep] for k, v in det_extra.items()},
        options=options,
    )
    log.info("ingested %s: %s", path, ds.summary())
    return ds


def _parse_floats(series) -> np.ndarray:
    """Exact string-to-float conversion; unparsable entries become NaN."""
    raw = series.str.strip()
    try:
        return raw.to_numpy().astype(float)
    except ValueError:
        # locate the bad rows; pandas' own parser is fast but not round-trip exact
        coerced = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        ok = np.isfinite(coerced)
        out = np.full(coerced.shape, np.nan)
        out[ok] = raw.to_numpy()[ok].astype(float)
        return out


def numeric_col(df, col, path):
    vals = _parse_floats(df[col])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise DataError(f"{path}: unparsable {col!r} at row(s) {', '.join(str(r + 2) for r in bad[:10])}")
    return vals


def _month_filter(year, jd, det):
    months = np.array([(_dt.date(int(y), 1, 1) + _dt.timedelta(days=int(d) - 1)).month
                       for y, d in zip(year, jd)])
    good = np.unique(months[det == 1])
    return np.isin(months, good)


def write_csv(ds: Dataset, path, delimiter=",") -> None:
    """Write the visit table in the ingestion schema (row order preserved)."""
    out = {
        "site_id": ds.site_ids[ds.obs_site],
        "easting": ds.coords[ds.obs_site, 0],
        "northing": ds.coords[ds.obs_site, 1],
        "year": ds.years[ds.obs_year],
        "julian_day": ds.julian_day,
        "detected": ds.y.astype(int),
    }
    if ds.list_length is not None:
        out["list_length"] = ds.list_length
    out.update(ds.occ_extra)
    out.update(ds.det_extra)
    pd.DataFrame(out).to_csv(path, sep=delimiter, index=False, float_format="%.17g")


def relative_list_length(ds: Dataset, radius: float = 50.0) -> np.ndarray:
    """List length divided by the largest list length recorded at any site
    within ``radius`` (self-inclusive, all dates pooled)."""
    if ds.list_length is None:
        raise DataError("dataset has no list_length column")
    if not radius > 0:
        raise ValueError("radius must be positive")
    site_max = np.zeros(ds.S)
    np.maximum.at(site_max, ds.obs_site, ds.list_length)
    tree = cKDTree(ds.coords)
    neigh = tree.query_ball_point(ds.coords, r=radius * (1 + 1e-12))
    hood_max = np.array([site_max[nb].max() for nb in neigh])
    return ds.list_length / hood_max[ds.obs_site]


def build_detection_design(ds: Dataset, options: IngestOptions | None = None):
    """Standardized detection covariates per visit.

    Columns: relative list length (when list lengths exist), Julian day and its
    square and cube (each power built on the raw day, then standardized), then
    any ``det_*`` columns.  Returns ``(X, names, standardization)``.
    """
    options = options or ds.options
    cols, names, std = [], [], {}
    raw = {}
    if ds.list_length is not None and options.use_list_length:
        raw["rel_list_length"] = relative_list_length(ds, options.radius_km)
    jd = ds.julian_day.astype(float)
    raw["jd"], raw["jd2"], raw["jd3"] = jd, jd**2, jd**3
    raw.update(ds.det_extra)
    for name, col in raw.items():
        z, m, sd = standardize(col, name)
        cols.append(z)
        names.append(name)
        std[name] = (m, sd)
    return np.column_stack(cols), tuple(names), std


def _unit_year_east_north(ds):
    return (ds.years[ds.unit_year].astype(float), ds.coords[ds.unit_site, 0], ds.coords[ds.unit_site, 1])


def build_occupancy_design(ds: Dataset, options: IngestOptions | None = None):
    """Standardized occupancy covariates per sampling unit.

    Year x easting and year x northing products of the standardized terms,
    themselves standardized; main effects are left out on purpose because the
    temporal and spatial random effects already carry them.  ``occ_*`` columns
    are averaged over each unit's visits.
    """
    options = options or ds.options
    cols, names, std = [], [], {}
    if options.interactions:
        yr, e, n = _unit_year_east_north(ds)
        for base, v in (("year", yr), ("easting", e), ("northing", n)):
            _, m, sd = standardize(v, base)
            std[base] = (m, sd)
        ys = (yr - std["year"][0]) / std["year"][1]
        for other, v in (("easting", e), ("northing", n)):
            name = f"year_x_{other}"
            prod = ys * (v - std[other][0]) / std[other][1]
            z, m, sd = standardize(prod, name)
            cols.append(z)
            names.append(name)
            std[name] = (m, sd)
    counts = np.bincount(ds.unit, minlength=ds.J)
    for name, v in ds.occ_extra.items():
        unit_mean = np.bincount(ds.unit, weights=v, minlength=ds.J) / counts
        z, m, sd = standardize(unit_mean, name)
        cols.append(z)
        names.append(name)
        std[name] = (m, sd)
    X = np.column_stack(cols) if cols else np.zeros((ds.J, 0))
    return X, tuple(names), std


def build_designs(ds: Dataset, options: IngestOptions | None = None) -> Dataset:
    options = options or ds.options
    Xd, dn, sd_det = build_detection_design(ds, options)
    Xo, on, sd_occ = build_occupancy_design(ds, options)
    std = {**{f"det:{k}": v for k, v in sd_det.items()}, **{f"occ:{k}": v for k, v in sd_occ.items()}}
    return replace(ds, X_det=Xd, det_names=dn, X_occ=Xo, occ_names=on, standardization=std, options=options)


def occupancy_design_grid(ds: Dataset) -> np.ndarray:
    """Occupancy covariates for every (year, site) pair, shape (Y, S, p).

    Interaction columns are rebuilt with the unit-level standardization;
    extra covariates take their unit value where a unit exists and 0 (the
    standardized mean) elsewhere.
    """
    p = len(ds.occ_names)
    out = np.zeros((ds.Y, ds.S, p))
    std = ds.standardization
    for c, name in enumerate(ds.occ_names):
        if name.startswith("year_x_"):
            other = name[len("year_x_"):]
            ym, ysd = std["occ:year"]
            om, osd = std[f"occ:{other}"]
            ys = (ds.years.astype(float) - ym) / ysd
            vs = (ds.coords[:, 0 if other == "easting" else 1] - om) / osd
            m, sd = std[f"occ:{name}"]
            out[:, :, c] = (np.outer(ys, vs) - m) / sd
        else:
            out[ds.unit_year, ds.unit_site, c] = ds.X_occ[:, c]
    return out


def detection_season_design(ds: Dataset, days) -> np.ndarray:
    """Detection covariates for the given Julian days with every non-date
    covariate held at its mean (0 after standardization)."""
    days = np.asarray(days, dtype=float)
    X = np.zeros((days.size, len(ds.det_names)))
    for c, name in enumerate(ds.det_names):
        power = {"jd": 1, "jd2": 2, "jd3": 3}.get(name)
        if power is not None:
            m, sd = ds.standardization[f"det:{name}"]
            X[:, c] = (days**power - m) / sd
    return X
