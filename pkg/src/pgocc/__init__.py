"""Occupancy trend models fitted by Polya-Gamma augmented Gibbs sampling,
with Gaussian-process year effects and gridded spatial effects."""

__version__ = "0.1.0"

from .data_model import Dataset, IngestOptions, ingest
from .pg import PgParams, draw_pg
from .posterior import ChainOutput, gof_report, summarize
from .sampler import McmcConfig, Priors, run_chain
from .simulate import SimConfig, generate, preset

__all__ = [
    "ChainOutput", "Dataset", "IngestOptions", "McmcConfig", "PgParams", "Priors", "SimConfig",
    "draw_pg", "generate", "gof_report", "ingest", "preset", "run_chain", "summarize",
]
