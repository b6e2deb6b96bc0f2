"""Experiment configuration: flat ``key = value`` files plus ``--key value`` overrides.

Lists are comma separated.  Reals accept powers written ``2^-10`` or
``2**-10``.  ``grid`` is ``t_end,n_steps``.  Lines starting with ``#`` are
comments.  Each experiment has its own defaults; a file or override only
replaces the keys it names.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..stochgen import GridSpec

EXPERIMENTS = ("uniqueness", "counterexample", "reflect", "tails", "excursions")

_POWER = re.compile(r"^\s*([0-9.]+)\s*(?:\^|\*\*)\s*([+-]?[0-9]+)\s*$")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment run depends on.

    ``aux_replicas`` sizes the secondary study of an experiment (the
    xi/zeta sample for ``tails``, the local-time calibration for
    ``excursions``); ``epsilon`` is the local-time level of the excursion
    study and ``horizon`` the time horizon of tail and excursion runs.
    """

    experiment: str
    seed: int = 20240601
    replicas: int = 100
    grid: GridSpec = field(default_factory=lambda: GridSpec(1.0, 2**14))
    kappa: float = 12.0
    lambda_list: tuple = (0.0, 1.0)
    mesh_list: tuple = ()
    beta_exponent: float = 0.75
    x_levels: tuple = (2.0, 6.0, 20.0)
    output_dir: str = "results"
    epsilon: float = 1.0
    horizon: float = 100.0
    aux_replicas: int = 10_000

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = {"t_end": self.grid.t_end, "n_steps": self.grid.n_steps}
        return d


FIELDS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))

DEFAULTS = {
    "uniqueness": dict(replicas=200, grid=GridSpec(1.0, 2**14), lambda_list=(0.0, 1.0),
                       mesh_list=tuple(2.0**-k for k in range(10, 15))),
    "counterexample": dict(replicas=100, grid=GridSpec(1.0, 2**17), kappa=12.0,
                           mesh_list=(2.0**-15, 2.0**-16, 2.0**-17)),
    "reflect": dict(replicas=1000, grid=GridSpec(1.0, 10_000)),
    "tails": dict(replicas=100_000, kappa=12.0, beta_exponent=0.75, x_levels=(2.0, 6.0, 20.0),
                  horizon=100.0, aux_replicas=10_000),
    "excursions": dict(replicas=200, grid=GridSpec(1.0, 10_000), epsilon=1.0, horizon=256.0,
                       mesh_list=(2.0**-12, 2.0**-13, 2.0**-14), aux_replicas=10_000),
}


def validate(cfg: ExperimentConfig):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if not isinstance(cfg.grid, GridSpec):
        raise ConfigError("grid must be a GridSpec")
    if int(cfg.replicas) < 1:
        raise ConfigError("replicas must be at least 1")
    if int(cfg.aux_replicas) < 1:
        raise ConfigError("aux_replicas must be at least 1")
    if not 0 <= int(cfg.seed) < 2**64:
        raise ConfigError("seed must be a nonnegative 64-bit integer")
    meshes = list(cfg.mesh_list)
    if any(m <= 0 for m in meshes):
        raise ConfigError("meshes must be positive")
    if any(b >= a for a, b in zip(meshes, meshes[1:])):
        raise ConfigError("mesh_list must be strictly decreasing")
    if cfg.kappa < 0:
        raise ConfigError("kappa must be nonnegative")
    if cfg.experiment == "tails" and not 0.5 < cfg.beta_exponent < 1:
        raise ConfigError("beta_exponent must lie in (1/2, 1)")
    if cfg.epsilon <= 0 or cfg.horizon <= 0:
        raise ConfigError("epsilon and horizon must be positive")
    if cfg.experiment in ("uniqueness", "counterexample", "excursions") and len(meshes) < 2:
        raise ConfigError(f"{cfg.experiment} needs at least two meshes")


def parse_real(text: str) -> float:
    m = _POWER.match(text)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_int(text: str) -> int:
    try:
        v = parse_real(text)
    except ConfigError:
        raise ConfigError(f"not an integer: {text!r}") from None
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def _parse_list(text: str) -> tuple:
    items = [s for s in (p.strip() for p in text.split(",")) if s]
    return tuple(parse_real(s) for s in items)


def _parse_grid(text: str) -> GridSpec:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"grid must be 't_end,n_steps', got {text!r}")
    try:
        return GridSpec(parse_real(parts[0]), parse_int(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


_PARSERS = {
    "experiment": str.strip,
    "seed": parse_int,
    "replicas": parse_int,
    "aux_replicas": parse_int,
    "grid": _parse_grid,
    "kappa": parse_real,
    "lambda_list": _parse_list,
    "mesh_list": _parse_list,
    "beta_exponent": parse_real,
    "x_levels": _parse_list,
    "output_dir": str.strip,
    "epsilon": parse_real,
    "horizon": parse_real,
}


def parse_pairs(pairs) -> dict:
    """Typed values for ``(key, text)`` pairs; unknown keys are an error."""
    out = {}
    for key, text in pairs:
        key = key.strip().replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}; known keys: {', '.join(FIELDS)}")
        out[key] = _PARSERS[key](text)
    return out


def read_config_file(path) -> list:
    """``(key, text)`` pairs from a flat ``key = value`` file."""
    pairs = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        k, v = line.split("=", 1)
        pairs.append((k, v))
    return pairs


def make_config(experiment: str, pairs=(), **overrides) -> ExperimentConfig:
    """Experiment defaults, then ``pairs`` (file/CLI text), then typed ``overrides``."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    values = dict(DEFAULTS[experiment])
    parsed = parse_pairs(pairs)
    if parsed.get("experiment", experiment) != experiment:
        raise ConfigError(f"config names experiment {parsed['experiment']!r}, run as {experiment!r}")
    values.update(parsed)
    values.update(overrides)
    values["experiment"] = experiment
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: ExperimentConfig) -> str:
    """The config as a ``key = value`` file that :func:`read_config_file` reads back."""
    lines = []
    for name in FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, GridSpec):
            text = f"{v.t_end!r},{v.n_steps}"
        elif isinstance(v, tuple):
            text = ",".join(repr(float(x)) for x in v)
        else:
            text = str(v)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
