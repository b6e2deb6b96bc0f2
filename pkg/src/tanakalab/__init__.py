"""Simulation toolkit for the perturbed Tanaka equation and its non-dominated counterexample.

Modules
-------
pathkit : sample paths, local times, excursions.
reflection : two-sided reflection and clock interlacing.
stochgen : seeded Brownian paths, bridges, excursions and time changes.
sde : Euler schemes and the mirror coupling.
counterexample : the non-dominated pair, its envelope process and assembly.
harness : configuration, experiment runners and the command line.
"""

from .errors import (
    ClockError,
    ConfigError,
    EnvelopeError,
    GridMismatchError,
    HorizonError,
    OutOfRangeError,
    TanakaLabError,
)
from .pathkit import LocalTimeCurve, SamplePath
from .report import ExperimentReport
from .stochgen import GridSpec, SeedSpec

__version__ = "0.1.0"

__all__ = [
    "ClockError",
    "ConfigError",
    "EnvelopeError",
    "ExperimentReport",
    "GridMismatchError",
    "GridSpec",
    "HorizonError",
    "LocalTimeCurve",
    "OutOfRangeError",
    "SamplePath",
    "SeedSpec",
    "TanakaLabError",
]
