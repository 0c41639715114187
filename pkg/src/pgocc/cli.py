"""Command-line front end: ``pgocc fit | simulate | bench | gof | summary``.

Options come from a flat ``key = value`` file (``--config``) and are
overridden by ``--key value`` on the command line.  Every command writes
``run_log.json`` into its output directory.  Failures print one line,
``pgocc: error: <Type>: <message>``, to stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import subprocess
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__, data_model, outputs, simulate
from .data_model import IngestOptions
from .posterior import ChainOutput, gof_report, summarize
from .sampler import McmcConfig, Priors, run_chain

log = logging.getLogger("pgocc")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# option tables


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(conv):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return [conv(v) for v in text]
        parts = [p.strip() for p in str(text).split(",") if p.strip()]
        return [conv(p) for p in parts]
    return parse


def _optional_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


def _columns(text):
    """Parse ``canonical=file_name`` pairs separated by commas."""
    out = {}
    for item in filter(None, (t.strip() for t in str(text).split(","))):
        key, sep, name = item.partition("=")
        key, name = key.strip(), name.strip()
        if not sep or not name:
            raise ValueError(f"expected canonical=name, got {item!r}")
        if key not in data_model.REQUIRED + data_model.OPTIONAL:
            raise ValueError(f"unknown column {key!r}; expected one of "
                             f"{', '.join(data_model.REQUIRED + data_model.OPTIONAL)}")
        out[key] = name
    return out


def _delimiter(text):
    text = str(text)
    return "\t" if text in ("\\t", "tab") else text


def _path(text):
    return str(Path(text).expanduser().resolve())


# key -> (parser, default, help)


def _help(text, default):
    if "(default:" in text or default is None or default == {}:
        return text
    if isinstance(default, (list, tuple)):
        default = ",".join(map(str, default))
    return f"{text} (default: {default})"


_RUN = {
    "seed": (int, 0, "random seed"),
    "iterations": (int, 1000, "post burn-in iterations"),
    "burnin": (int, 500, "burn-in iterations"),
    "thin": (int, 1, "keep every n-th post burn-in iteration"),
    "grid_step_km": (float, 20.0, "spacing of the spatial grid"),
    "threads": (int, 1, "worker threads for the PG sweeps"),
}
_MODEL = {
    "spatial": (_bool, True, "include the gridded spatial effect"),
    "constant_detection": (_bool, False, "one detection intercept shared by all years"),
    "fix_detection_hyper": (_bool, False, "hold the detection-intercept mean and variance fixed"),
    "ls_grid": (_list(float), None, "comma-separated spatial length scales"),
    "n_ls_grid": (int, 10, "number of spatial length scales when ls_grid is unset"),
    "mh_step": (float, 0.5, "initial proposal scale of the temporal hyperparameter update"),
    "adapt": (_bool, True, "adapt the temporal proposal during burn-in"),
    "chunk_size": (int, 8192, "PG draws per work chunk"),
    "debug_dense_check": (_bool, False, "compare sparse and dense cross-products every iteration"),
}
_INGEST = {
    "radius_km": (float, 50.0, "neighbourhood radius of the relative list length"),
    "filter_months": (_bool, False, "drop visits in months with no detections"),
    "interactions": (_bool, True, "year by easting/northing occupancy covariates"),
    "use_list_length": (_bool, True, "use the list_length column when present"),
    "delimiter": (_delimiter, ",", "input field delimiter; \\t or tab for tabs"),
    "columns": (_columns, {}, "file column names as canonical=name pairs, e.g. site_id=gridref,detected=seen"),
}
_PRIORS = {f.name: (_optional_float if f.name in ("b_lT", "b_lS") else float, f.default, "prior setting")
           for f in fields(Priors)}

COMMANDS = {
    "fit": {
        "input": (_path, None, "visit table (CSV)"),
        "out": (_path, "fit_out", "output directory"),
        "map_years": (_list(int), None, "calendar years whose site maps are written (default: first,last)"),
        **_RUN, **_MODEL, **_INGEST, **_PRIORS,
    },
    "simulate": {
        "preset": (str, None, f"one of {', '.join(sorted(simulate.PRESETS))}"),
        "out": (_path, "sim_out", "output directory"),
        "seed": (int, 0, "random seed"),
        "n_sites": (int, None, "number of sites"),
        "n_years": (int, None, "number of years"),
        "first_year": (int, None, "calendar year of the first season"),
        "visit_model": (str, None, "poisson or one_plus_poisson"),
        "visit_mean": (float, None, "mean of the Poisson visit count"),
        "visit_prob": (float, None, "probability a site is surveyed in a year"),
        "mu_psi": (float, None, "occupancy intercept"),
        "sigma_eps": (float, None, "sd of the site effects"),
        "u": (_list(float), None, "detection log-odds, one value or one per year"),
        "sigma_T": (float, None, "year-effect amplitude"),
        "l_T": (float, None, "year-effect length scale"),
        "sigma_S": (float, None, "spatial-effect amplitude"),
        "l_S": (float, None, "spatial-effect length scale"),
        "list_length_mean": (float, None, "mean list length"),
    },
    "bench": {
        "out": (_path, "bench_out", "output directory"),
        "presets": (_list(str), list(simulate.TIMING_PRESETS), "comma-separated preset names"),
        "spatial": (_bool, False, "include the gridded spatial effect"),
        **{**_RUN, "iterations": (int, 10_000, "post burn-in iterations"), "burnin": (int, 0, "burn-in iterations")},
    },
    "gof": {
        "chain": (_path, None, "chain.npz or the fit directory holding it"),
        "out": (_path, None, "output directory (default: the chain's directory)"),
    },
    "summary": {
        "chain": (_path, None, "chain.npz or the fit directory holding it"),
        "out": (_path, None, "output directory (default: the chain's directory)"),
        "levels": (_list(float), [0.95], "comma-separated credible levels"),
    },
}

_SIM_FIELDS = {"n_sites": "S", "n_years": "Y"}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_config(command: str, file_values: dict, cli_values: dict) -> dict:
    """Merge defaults, config-file values and command-line overrides."""
    table = COMMANDS[command]
    unknown = sorted(set(file_values) - set(table))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    cfg = {k: default for k, (_, default, _) in table.items()}
    for source in (file_values, cli_values):
        for key, value in source.items():
            if value is None:
                continue
            parse = table[key][0]
            try:
                cfg[key] = parse(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    return cfg


# ---------------------------------------------------------------------------
# helpers


def version_string() -> str:
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+git.{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _run_log(command, cfg, wall, extra=None) -> dict:
    out = {
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed"),
        "version": version_string(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "wall_seconds": wall,
    }
    if extra:
        out.update(extra)
    return out


def _mcmc_config(cfg, years=None) -> McmcConfig:
    keys = {f.name for f in fields(McmcConfig)}
    kw = {k: v for k, v in cfg.items() if k in keys}
    if kw.get("ls_grid") is not None:
        kw["ls_grid"] = tuple(kw["ls_grid"])
    if years is not None:
        kw["map_years"] = tuple(int(i) for i in years)
    return McmcConfig(**kw)


def _chain_path(p) -> Path:
    p = Path(p)
    return p / "chain.npz" if p.is_dir() else p


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg: dict) -> int:
    if cfg["input"] is None:
        raise ConfigError("fit needs an input file (--input)")
    if cfg["thin"] < 1 or cfg["iterations"] // cfg["thin"] < 1:
        raise ConfigError("fit keeps no draws; iterations must be >= thin >= 1")
    t0 = time.perf_counter()
    opts = IngestOptions(**{k: cfg[k] for k in _INGEST})
    ds = data_model.ingest(cfg["input"], opts)
    years = list(ds.years)
    wanted = cfg["map_years"] if cfg["map_years"] is not None else sorted({years[0], years[-1]})
    missing = [y for y in wanted if y not in years]
    if missing:
        raise ConfigError(f"map_years not in the data: {missing}")
    priors = Priors(**{k: cfg[k] for k in _PRIORS})
    config = _mcmc_config(cfg, [years.index(y) for y in wanted])
    chain = run_chain(ds, priors, config)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    chain.save(out / "chain.npz")
    outputs.write_all(chain, ds, out)
    wall = time.perf_counter() - t0
    extra = {k: chain.metadata[k] for k in ("timing", "temporal_mh_acceptance", "temporal_mh_scale",
                                             "N", "J", "S", "Y", "M", "occ_names", "det_names")}
    outputs.write_run_log(_run_log("fit", cfg, wall, extra), out)
    print(f"fit: {ds.summary()}; wrote {out}")
    return 0


def cmd_simulate(cfg: dict) -> int:
    t0 = time.perf_counter()
    over = {}
    for key, value in cfg.items():
        if key in ("preset", "out") or value is None:
            continue
        name = _SIM_FIELDS.get(key, key)
        if name == "u":
            value = value[0] if len(value) == 1 else tuple(value)
        over[name] = value
    sim = simulate.preset(cfg["preset"], **over) if cfg["preset"] else simulate.SimConfig(**over)
    ds, truth = simulate.generate(sim)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    data_model.write_csv(ds, out / "data.csv")
    simulate.write_truth(truth, out / "truth.json")
    outputs.write_run_log(_run_log("simulate", cfg, time.perf_counter() - t0,
                                   {"sim_config": asdict(sim), "summary": ds.summary()}), out)
    print(f"simulate: {ds.summary()}; wrote {out}")
    return 0


def scaling_exponent(sites, seconds) -> float:
    """Slope of log(time) on log(sites)."""
    if len(sites) < 2:
        return float("nan")
    return float(np.polyfit(np.log(sites), np.log(seconds), 1)[0])


def cmd_bench(cfg: dict) -> int:
    t0 = time.perf_counter()
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in cfg["presets"]:
        sim = simulate.preset(name, seed=cfg["seed"])
        ds, _ = simulate.generate(sim)
        config = _mcmc_config({**cfg, "map_years": None}, [0])
        t1 = time.perf_counter()
        chain = run_chain(ds, None, config)
        wall = time.perf_counter() - t1
        total = config.iterations + config.burnin
        rate = total / chain.metadata["timing"]["sampling_seconds"] if total else float("nan")
        rows.append((name, ds.S, wall / 60.0, rate))
        print(f"bench: {name} sites={ds.S} wall_minutes={wall / 60:.3f} iter_per_sec={rate:.1f}")
    outputs.write_table(out / "bench.csv", ["preset", "sites", "wall_minutes", "iter_per_sec"], rows)
    expo = scaling_exponent([r[1] for r in rows], [r[2] for r in rows])
    print(f"bench: scaling exponent {expo:.3f}")
    outputs.write_run_log(_run_log("bench", cfg, time.perf_counter() - t0,
                                   {"scaling_exponent": expo,
                                    "table": [dict(zip(["preset", "sites", "wall_minutes", "iter_per_sec"], r))
                                              for r in rows]}), out)
    return 0


def cmd_gof(cfg: dict) -> int:
    if cfg["chain"] is None:
        raise ConfigError("gof needs a chain (--chain)")
    t0 = time.perf_counter()
    path = _chain_path(cfg["chain"])
    chain = ChainOutput.load(path)
    out = Path(cfg["out"] or path.parent)
    out.mkdir(parents=True, exist_ok=True)
    _, _, rep = outputs.write_gof(chain, out)
    frac = rep["year"]["inside_95_fraction"]
    outputs.write_run_log(_run_log("gof", cfg, time.perf_counter() - t0,
                                   {"year_inside_95_fraction": frac,
                                    "region_inside_95_fraction": rep["region"]["inside_95_fraction"]}), out)
    print(f"gof: {frac:.3f} of yearly statistics inside the 95% interval")
    return 0


def cmd_summary(cfg: dict) -> int:
    if cfg["chain"] is None:
        raise ConfigError("summary needs a chain (--chain)")
    t0 = time.perf_counter()
    path = _chain_path(cfg["chain"])
    chain = ChainOutput.load(path)
    rows = summarize(chain, levels=tuple(cfg["levels"]))
    out = Path(cfg["out"] or path.parent)
    out.mkdir(parents=True, exist_ok=True)
    header = list(rows[0])
    outputs.write_table(out / "summary.csv", header, ([r[h] for h in header] for r in rows))
    outputs.write_run_log(_run_log("summary", cfg, time.perf_counter() - t0), out)
    print(f"summary: {len(rows)} quantities; wrote {out / 'summary.csv'}")
    return 0


HANDLERS = {"fit": cmd_fit, "simulate": cmd_simulate, "bench": cmd_bench, "gof": cmd_gof,
            "summary": cmd_summary}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        msg = " ".join(message.split())
        self.exit(2, f"pgocc: error: UsageError: {self.prog}: {msg}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pgocc", description="Occupancy trends with PG-augmented Gibbs sampling.")
    parser.add_argument("--version", action="version", version=f"pgocc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in COMMANDS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("-v", "--verbose", action="store_true")
        for key, (parse, default, text) in table.items():
            flag = "--" + key.replace("_", "-")
            if parse is _bool:
                # a bare boolean flag means true
                p.add_argument(flag, dest=key, default=None, nargs="?", const="true", metavar="BOOL",
                               help=_help(text, default))
            else:
                p.add_argument(flag, dest=key, default=None, metavar="VALUE", help=_help(text, default))
        if "spatial" in table:
            p.add_argument("--no-spatial", dest="spatial", action="store_const", const="false",
                           help="drop the gridded spatial effect")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cli_values = {k: getattr(args, k) for k in COMMANDS[args.command]}
        cfg = resolve_config(args.command, file_values, cli_values)
        return HANDLERS[args.command](cfg)
    except Exception as exc:  # every failure is reported on a single line
        msg = " ".join(str(exc).split()) or repr(exc)
        print(f"pgocc: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
