"""Config-driven experiments: the inclusion sweep, polynomial norms and traces, free spectra, and the selftest."""

from .config import ConfigError, config_hash, load_config
from .runner import ExperimentOutput, run_free_spectrum, run_thm1, run_thm2, run_weak, write_outputs
from .selftest import format_report, run_selftest

__all__ = [
    "ConfigError",
    "ExperimentOutput",
    "config_hash",
    "format_report",
    "load_config",
    "run_free_spectrum",
    "run_selftest",
    "run_thm1",
    "run_thm2",
    "run_weak",
    "write_outputs",
]
