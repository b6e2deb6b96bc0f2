"""Configuration, experiment runners, tail and excursion verifiers, and the CLI."""

from ..report import ExperimentReport
from .config import EXPERIMENTS, ExperimentConfig, make_config, read_config_file
from .excursion import excursion_scaling, levy_calibration
from .experiments import run_experiment
from .tails import TailStatistics, tail_bound_check, xi_zeta_tails

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "TailStatistics",
    "excursion_scaling",
    "levy_calibration",
    "make_config",
    "read_config_file",
    "run_experiment",
    "tail_bound_check",
    "xi_zeta_tails",
]
