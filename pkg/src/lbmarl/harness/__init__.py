"""Experiment orchestration: configs, seeded runs, CSV and SVG artifacts, CLI."""

from .config import METHODS, PROFILES, ExperimentConfig, build_config, profile_config, validate_config
from .experiment import evaluate_experiment, read_csv, run_experiment, write_csv

__all__ = [
    "METHODS", "PROFILES", "ExperimentConfig", "build_config", "profile_config", "validate_config",
    "run_experiment", "evaluate_experiment", "read_csv", "write_csv", "emit_plots",
]


def emit_plots(*args, **kwargs):
    # matplotlib is imported lazily so library users without plotting stay light
    from .plots import emit_plots as _emit

    return _emit(*args, **kwargs)
