import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgocc import simulate
from pgocc.posterior import (BETWEEN, INSIDE_95, OUTSIDE_99, ChainOutput, autocorrelation, classify,
                             credible_interval, effective_sample_size, gof_report, summarize, summarize_draws)
from pgocc.sampler import McmcConfig, run_chain


def ar1(phi, n, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1 - phi**2)
    e = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_ess_iid_close_to_n():
    x = np.random.default_rng(0).standard_normal(20_000)
    assert 0.85 * x.size < effective_sample_size(x) < 1.15 * x.size


@pytest.mark.parametrize("phi", [0.5, 0.9])
def test_ess_ar1(phi):
    rng = np.random.default_rng(1)
    n = 100_000
    x = ar1(phi, n, rng)
    expect = n * (1 - phi) / (1 + phi)
    assert effective_sample_size(x) == pytest.approx(expect, rel=0.15)


def test_ess_constant_and_short():
    assert effective_sample_size(np.ones(50)) == 50
    assert effective_sample_size([1.0]) == 1


def test_autocorrelation_lag0():
    rho = autocorrelation(np.random.default_rng(2).standard_normal(300))
    assert rho[0] == pytest.approx(1.0)
    assert np.all(np.abs(rho[1:20]) < 0.25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(10, 400))
def test_ess_bounded(seed, n):
    x = np.random.default_rng(seed).standard_normal(n).cumsum()
    ess = effective_sample_size(x)
    assert 0 < ess <= n * np.log10(max(n, 10)) + 1e-9


def test_credible_interval_equal_tailed():
    x = np.arange(1001.0)
    lo, hi = credible_interval(x, 0.9)
    assert lo == pytest.approx(50.0) and hi == pytest.approx(950.0)


def test_classify_three_way():
    reps = np.tile(np.arange(1000.0)[:, None], (1, 3))
    obs = [500.0, 20.0, 2000.0]
    assert classify(obs, reps) == [INSIDE_95, BETWEEN, OUTSIDE_99]


@pytest.fixture(scope="module")
def chain():
    ds = simulate.generate(simulate.SimConfig(S=80, Y=4, seed=1))[0]
    return run_chain(ds, config=McmcConfig(iterations=40, burnin=10, map_years=(1,)))


def test_summary_rows(chain):
    rows = summarize(chain, levels=(0.5, 0.95))
    names = [r["quantity"] for r in rows]
    assert "mu_psi" in names and "index[2000]" in names and "b[3]" in names
    r = rows[names.index("mu_psi")]
    assert r["lower_95"] <= r["lower_50"] <= r["median"] <= r["upper_50"] <= r["upper_95"]
    assert r["ess"] > 0


def test_summarize_draws():
    row = summarize_draws(np.random.default_rng(0).standard_normal(4000))
    assert abs(row["median"]) < 0.1
    assert row["lower_95"] == pytest.approx(-1.96, abs=0.15)
    with pytest.raises(ValueError):
        summarize_draws([])


def test_gof_report_keys(chain):
    rep = gof_report(chain)
    assert len(rep["year"]["class"]) == 4
    assert len(rep["region"]["class"]) == chain.region_centers.shape[0]
    assert 0 <= rep["year"]["inside_95_fraction"] <= 1
    np.testing.assert_array_equal(rep["year"]["observed"], chain.observed_year)


def test_save_load_round_trip(chain, tmp_path):
    p = tmp_path / "c.npz"
    chain.save(p)
    back = ChainOutput.load(p)
    for k, v in chain.draws.items():
        np.testing.assert_array_equal(back.draws[k], v)
    np.testing.assert_array_equal(back.index_draws, chain.index_draws)
    np.testing.assert_array_equal(back.psi_draws, chain.psi_draws)
    assert back.metadata["config"]["iterations"] == 40
    assert "timing" not in back.metadata
    q = tmp_path / "d.npz"
    chain.save(q)
    assert p.read_bytes() == q.read_bytes()


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        ChainOutput.load(tmp_path / "missing.npz")
    np.savez(tmp_path / "bad.npz", index_draws=np.zeros((1, 1)))
    with pytest.raises(KeyError, match="gof_year"):
        ChainOutput.load(tmp_path / "bad.npz")


def test_empty_chain_errors():
    ds = simulate.generate(simulate.SimConfig(S=40, Y=3, seed=2))[0]
    ch = run_chain(ds, config=McmcConfig(iterations=0, burnin=0))
    with pytest.raises(ValueError, match="gof_year"):
        gof_report(ch)
    with pytest.raises(ValueError):
        summarize(ch)
