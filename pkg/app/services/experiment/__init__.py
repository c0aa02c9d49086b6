"""
Experiment harness: flat config files, per-method pipelines, the
multi-repetition runner and cross-run reports.
"""

from app.services.experiment.config_files import ConfigError, dump_flat, load_run_config, parse_flat
from app.services.experiment.pipelines import PIPELINES, Problem, build_dataset, resolve_problem
from app.services.experiment.reporting import build_report, render_report, write_report
from app.services.experiment.runner import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_PARTIAL_FAILURE,
    EXIT_TOTAL_FAILURE,
    run,
    run_repetition,
    summarize,
)

__all__ = [
    "ConfigError",
    "dump_flat",
    "load_run_config",
    "parse_flat",
    "PIPELINES",
    "Problem",
    "build_dataset",
    "resolve_problem",
    "build_report",
    "render_report",
    "write_report",
    "EXIT_CONFIG_ERROR",
    "EXIT_OK",
    "EXIT_PARTIAL_FAILURE",
    "EXIT_TOTAL_FAILURE",
    "run",
    "run_repetition",
    "summarize",
]
