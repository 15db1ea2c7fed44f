"""Experiment configuration, runners and report emission."""

from .config import EXPERIMENTS, ConfigError, defaults, load_config, resolve
from .report import Report, Table, check_golden, read_table
from .runners import REGISTRY, evaluate, run_experiment

__all__ = [
    "EXPERIMENTS",
    "REGISTRY",
    "ConfigError",
    "Report",
    "Table",
    "check_golden",
    "defaults",
    "evaluate",
    "load_config",
    "read_table",
    "resolve",
    "run_experiment",
]
