import statistics
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgocc import data_model, simulate
from pgocc.data_model import (ConstantColumnError, DataError, IngestOptions, from_arrays, ingest,
                              relative_list_length, standardize, write_csv)


def _pstd(values):
    m = statistics.fmean(values)
    sd = statistics.pstdev(values)
    return [(v - m) / sd for v in values]


def _write(tmp_path, text, name="visits.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


HEADER = "site_id,easting,northing,year,julian_day,detected,list_length\n"


def test_single_unit(tmp_path):
    p = _write(tmp_path, HEADER + "A,0,0,2001,10,1,2\nA,0,0,2001,20,0,3\nA,0,0,2001,30,0,1\n")
    ds = ingest(p, IngestOptions(interactions=False))
    assert (ds.N, ds.J, ds.S, ds.Y) == (3, 1, 1, 1)


def test_full_cross(tmp_path):
    rows = ["A,0,0,2001,10,1,2", "A,0,0,2002,20,0,3", "B,5,5,2001,30,0,1", "B,5,5,2002,40,1,4"]
    ds = ingest(_write(tmp_path, HEADER + "\n".join(rows) + "\n"))
    assert (ds.N, ds.J, ds.S, ds.Y) == (4, 4, 2, 2)
    np.testing.assert_array_equal(ds.years, [2001, 2002])


def test_indices_first_appearance():
    ds = from_arrays(["B", "A", "B", "C"], [[1, 1], [0, 0], [1, 1], [2, 2]], [2003, 2001, 2001, 2003],
                     [5, 6, 7, 8], [1, 0, 0, 1], options=IngestOptions(interactions=False))
    np.testing.assert_array_equal(ds.site_ids, ["B", "A", "C"])
    np.testing.assert_array_equal(ds.obs_site, [0, 1, 0, 2])
    np.testing.assert_array_equal(ds.obs_year, [1, 0, 0, 1])
    np.testing.assert_array_equal(ds.unit, [0, 1, 2, 3])


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        ingest(tmp_path / "nope.csv")


def test_missing_column(tmp_path):
    p = _write(tmp_path, "site_id,easting,year,julian_day,detected\nA,0,2001,1,1\n")
    with pytest.raises(DataError, match="northing"):
        ingest(p)


def test_unparsable_row_is_numbered(tmp_path):
    p = _write(tmp_path, HEADER + "A,0,0,2001,10,1,2\nB,x,0,2001,20,0,3\n")
    with pytest.raises(DataError, match="row\\(s\\) 3"):
        ingest(p)


def test_bad_detected_value(tmp_path):
    p = _write(tmp_path, HEADER + "A,0,0,2001,10,2,2\n")
    with pytest.raises(DataError, match="0/1"):
        ingest(p)


def test_empty_file(tmp_path):
    with pytest.raises(DataError, match="zero observations"):
        ingest(_write(tmp_path, HEADER))


def test_no_detections(tmp_path):
    p = _write(tmp_path, HEADER + "A,0,0,2001,10,0,2\nA,0,0,2002,11,0,2\n")
    with pytest.raises(DataError, match="no detections"):
        ingest(p)


def test_duplicates_only_warn(tmp_path):
    p = _write(tmp_path, HEADER + "A,0,0,2001,10,1,2\nA,0,0,2001,10,1,2\nA,0,0,2001,12,0,5\n")
    with pytest.warns(UserWarning, match="duplicate"):
        ds = ingest(p, IngestOptions(interactions=False))
    assert ds.N == 3


def test_column_mapping_and_delimiter(tmp_path):
    text = "site;x;northing;year;julian_day;detected\nA;0;0;2001;10;1\nA;0;0;2001;11;0\n"
    opts = IngestOptions(delimiter=";", columns={"site_id": "site", "easting": "x"}, interactions=False)
    ds = ingest(_write(tmp_path, text), opts)
    assert ds.N == 2 and ds.list_length is None
    assert ds.det_names == ("jd", "jd2", "jd3")


def test_month_filter(tmp_path):
    # detections only in January; the June visit is dropped
    rows = ["A,0,0,2001,10,1,2", "A,0,0,2001,20,0,3", "A,0,0,2001,170,0,3", "A,0,0,2002,15,0,3"]
    ds = ingest(_write(tmp_path, HEADER + "\n".join(rows) + "\n"),
                IngestOptions(filter_months=True, interactions=False))
    assert ds.N == 3
    assert 170 not in ds.julian_day


# standardization


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=50).filter(lambda v: np.ptp(v) > 1e-3))
def test_standardize_properties(values):
    z, _, _ = standardize(values)
    assert abs(z.mean()) < 1e-8 and abs(z.std() - 1) < 1e-8
    z2, m2, sd2 = standardize(z)
    np.testing.assert_allclose(z2, z, atol=1e-12)


def test_constant_column_named():
    with pytest.raises(ConstantColumnError, match="jd"):
        standardize([3, 3, 3], "jd")


# detection design


JD10 = [12, 40, 75, 100, 130, 160, 200, 240, 290, 350]


def _det_fixture():
    n = len(JD10)
    return from_arrays([f"s{i % 3}" for i in range(n)], [[i % 3, 0] for i in range(n)], [2001] * n,
                       JD10, [1] + [0] * (n - 1), options=IngestOptions(interactions=False))


def test_jd_powers_hand_computed():
    ds = _det_fixture()
    assert ds.det_names == ("jd", "jd2", "jd3")
    np.testing.assert_allclose(ds.X_det[:, 0], _pstd(JD10), atol=1e-12)
    np.testing.assert_allclose(ds.X_det[:, 1], _pstd([d * d for d in JD10]), atol=1e-12)
    np.testing.assert_allclose(ds.X_det[:, 2], _pstd([d ** 3 for d in JD10]), atol=1e-12)
    assert not np.allclose(ds.X_det[:, 1], ds.X_det[:, 0] ** 2)
    for c in range(3):
        assert abs(ds.X_det[:, c].mean()) < 1e-8 and abs(ds.X_det[:, c].std() - 1) < 1e-8


def test_constant_jd_rejected():
    with pytest.raises(ConstantColumnError, match="jd"):
        from_arrays(["a", "b"], [[0, 0], [1, 1]], [2001, 2001], [100, 100], [1, 0],
                    options=IngestOptions(interactions=False))


def test_extra_detection_covariate_appended():
    n = len(JD10)
    ds = from_arrays(["a"] * n, [[0, 0]] * n, [2001] * n, JD10, [1] + [0] * (n - 1),
                     det_extra={"det_effort": np.arange(n, dtype=float)},
                     options=IngestOptions(interactions=False))
    assert ds.det_names[-1] == "det_effort"
    np.testing.assert_allclose(ds.X_det[:, -1], _pstd(list(range(n))))


# relative list length


def test_rll_isolated_site():
    ds = from_arrays(["a", "b"], [[0, 0], [500, 500]], [2001, 2001], [1, 2], [1, 0], list_length=[7, 3],
                     build=False)
    np.testing.assert_allclose(relative_list_length(ds, 50), [1.0, 1.0])


def test_rll_colocated():
    ds = from_arrays(["a", "b"], [[0, 0], [0, 0]], [2001, 2001], [1, 2], [1, 0], list_length=[3, 10],
                     build=False)
    np.testing.assert_allclose(relative_list_length(ds, 50), [0.3, 1.0])


def test_rll_brute_force():
    rng = np.random.default_rng(4)
    S, n = 100, 300
    coords = rng.uniform(0, 300, (S, 2))
    site = rng.integers(0, S, n)
    ll = rng.integers(1, 30, n).astype(float)
    ds = from_arrays([f"s{s}" for s in site], coords[site], rng.integers(2000, 2003, n), rng.integers(1, 366, n),
                     rng.integers(0, 2, n), list_length=ll, build=False)
    got = relative_list_length(ds, 50)
    xy = coords[site]
    d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    expect = np.array([ll[i] / ll[d[i] <= 50].max() for i in range(n)])
    np.testing.assert_allclose(got, expect, rtol=1e-14)
    assert np.all((got > 0) & (got <= 1))
    # scale free
    ds2 = from_arrays([f"s{s}" for s in site], xy, ds.years[ds.obs_year], ds.julian_day, ds.y,
                      list_length=ll * 4, build=False)
    np.testing.assert_allclose(relative_list_length(ds2, 50), got, rtol=1e-14)


def test_rll_needs_list_length():
    ds = from_arrays(["a"], [[0, 0]], [2001], [1], [1], build=False)
    with pytest.raises(DataError):
        relative_list_length(ds)


# occupancy design


def test_single_year_interactions_rejected():
    with pytest.raises(ConstantColumnError, match="year"):
        from_arrays(["a", "b"], [[0, 0], [1, 1]], [2001, 2001], [5, 9], [1, 0])


def test_symmetric_sign_product():
    # standardized year and easting are each +-1, so the raw product is +-1
    sites = ["a", "b", "a", "b"]
    coords = [[0, 0], [10, 10], [0, 0], [10, 10]]
    ds = from_arrays(sites, coords, [2001, 2001, 2003, 2003], [5, 9, 13, 40], [1, 0, 0, 0])
    e = ds.standardization
    ys = (ds.years[ds.unit_year] - e["occ:year"][0]) / e["occ:year"][1]
    es = (ds.coords[ds.unit_site, 0] - e["occ:easting"][0]) / e["occ:easting"][1]
    np.testing.assert_allclose(np.abs(ys * es), 1.0)
    np.testing.assert_allclose(ds.X_occ[:, 0], ys * es)   # mean 0, sd 1 already


def test_interactions_hand_computed():
    rng = np.random.default_rng(8)
    n = 20
    sites = [f"s{i}" for i in range(n)]
    east = rng.uniform(0, 100, n).round(1)
    north = rng.uniform(0, 100, n).round(1)
    years = rng.integers(2000, 2006, n)
    ds = from_arrays(sites, np.column_stack([east, north]), years, rng.integers(1, 366, n),
                     [1] + [0] * (n - 1), options=IngestOptions())
    assert ds.occ_names == ("year_x_easting", "year_x_northing")
    ys = _pstd([float(v) for v in years])
    es = _pstd(list(east))
    ns = _pstd(list(north))
    np.testing.assert_allclose(ds.X_occ[:, 0], _pstd([a * b for a, b in zip(ys, es)]), atol=1e-12)
    np.testing.assert_allclose(ds.X_occ[:, 1], _pstd([a * b for a, b in zip(ys, ns)]), atol=1e-12)


def test_occupancy_grid_matches_units():
    ds, _ = simulate.generate(simulate.SimConfig(S=60, Y=4, seed=2))
    G = data_model.occupancy_design_grid(ds)
    assert G.shape == (ds.Y, ds.S, len(ds.occ_names))
    np.testing.assert_allclose(G[ds.unit_year, ds.unit_site], ds.X_occ, atol=1e-12)


def test_season_design_matches_observations():
    ds, _ = simulate.generate(simulate.SimConfig(S=60, Y=4, seed=2), IngestOptions(use_list_length=False))
    X = data_model.detection_season_design(ds, ds.julian_day)
    np.testing.assert_allclose(X, ds.X_det, atol=1e-10)


# round trip


def test_round_trip(tmp_path):
    cfg = simulate.SimConfig(S=200, Y=3, visit_mean=1.7, seed=5)
    ds, _ = simulate.generate(cfg)
    assert 500 < ds.N < 1500
    p = tmp_path / "rt.csv"
    write_csv(ds, p)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ds2 = ingest(p)
    for name in ("site_ids", "coords", "years", "obs_site", "obs_year", "julian_day", "y", "unit", "unit_site",
                 "unit_year", "list_length", "X_det", "X_occ"):
        np.testing.assert_array_equal(getattr(ds2, name), getattr(ds, name), err_msg=name)
    assert ds2.det_names == ds.det_names and ds2.occ_names == ds.occ_names


def test_extra_columns_round_trip(tmp_path):
    n = 6
    ds = from_arrays(["a", "b", "c", "a", "b", "c"], [[0, 0], [30, 5], [70, 90]] * 2, [2001] * 3 + [2002] * 3,
                     [10, 50, 90, 130, 170, 210], [1, 0, 0, 1, 0, 0],
                     occ_extra={"occ_habitat": np.arange(n, dtype=float)},
                     det_extra={"det_effort": np.array([1.0, 2, 2, 3, 5, 8])})
    p = tmp_path / "x.csv"
    write_csv(ds, p)
    ds2 = ingest(p)
    assert ds2.occ_names == ("year_x_easting", "year_x_northing", "occ_habitat")
    np.testing.assert_array_equal(ds2.X_occ, ds.X_occ)
    np.testing.assert_array_equal(ds2.X_det, ds.X_det)
