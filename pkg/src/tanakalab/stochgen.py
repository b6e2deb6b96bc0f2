"""Seeded Brownian raw material and time-change operators.

Random numbers come from numpy's counter-based Philox bit generator keyed by
``SeedSequence(seed, spawn_key=(stream_index, *subkeys))``; Gaussian draws use
``Generator.standard_normal`` (numpy's ziggurat).  A ``(seed, stream_index)``
pair therefore fixes every sample, on every platform numpy supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonError
from .pathkit import SamplePath, LocalTimeCurve, quadratic_variation

__all__ = [
    "SeedSpec",
    "GridSpec",
    "brownian",
    "brownian_increments",
    "brownian_bridge",
    "brownian_excursion",
    "brownian_at",
    "brownian_bridge_at",
    "excursion_coordinates",
    "clock_integral",
    "invert_clock",
    "power_time_change",
    "bridge_refine",
    "refine_for_clock",
    "dds_transform",
]


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Independent generator for this stream (and optional sub-stream)."""
        ss = np.random.SeedSequence(
            int(self.seed), spawn_key=(int(self.stream_index),) + tuple(int(k) for k in subkeys)
        )
        return np.random.Generator(np.random.Philox(ss))

    def child(self, k: int) -> "SeedSpec":
        """Seed spec for replica ``k`` of an experiment seeded by ``self.seed``."""
        return SeedSpec(self.seed, k)


@dataclass(frozen=True)
class GridSpec:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if int(self.n_steps) < 2:
            raise ValueError("n_steps must be at least 2")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        # k / n * t_end keeps dyadic sub-grids bit-identical to strided fine grids
        return np.arange(self.n_steps + 1) / self.n_steps * self.t_end

    def coarsen(self, factor: int) -> "GridSpec":
        if self.n_steps % factor:
            raise ValueError("factor must divide n_steps")
        return GridSpec(self.t_end, self.n_steps // factor)


def brownian_increments(gen: np.random.Generator, n: int, dt: float) -> np.ndarray:
    return gen.standard_normal(n) * np.sqrt(dt)


def brownian(seed: SeedSpec, grid: GridSpec, *subkeys: int) -> SamplePath:
    """Standard Brownian motion started at 0 on ``grid``."""
    gen = seed.generator(*subkeys)
    inc = brownian_increments(gen, grid.n_steps, grid.dt)
    return SamplePath(grid.times(), np.concatenate(([0.0], np.cumsum(inc))))


def _unit_grid(grid: GridSpec):
    if grid.t_end != 1.0:
        raise ValueError("bridge and excursion grids must span [0, 1]")


def brownian_bridge(seed: SeedSpec, grid: GridSpec, *subkeys: int) -> SamplePath:
    """``B_t - t B_1`` for a Brownian motion ``B``; both endpoints are exactly 0."""
    _unit_grid(grid)
    b = brownian(seed, grid, *subkeys)
    t = b.times
    return SamplePath(t, b.values - t * b.values[-1])


def brownian_excursion(seed: SeedSpec, grid: GridSpec, *subkeys: int) -> SamplePath:
    """Standard excursion as the norm of three independent bridges.

    This is the three-dimensional Bessel bridge representation, exact in law.
    """
    _unit_grid(grid)
    sq = np.zeros(grid.n_steps + 1)
    for k in range(3):
        sq += brownian_bridge(seed, grid, *subkeys, 1000 + k).values ** 2
    return SamplePath(grid.times(), np.sqrt(sq))


def brownian_at(seed: SeedSpec, times, *subkeys: int) -> SamplePath:
    """Brownian motion on an arbitrary increasing grid starting at time 0."""
    t = np.asarray(times, dtype=float)
    if t[0] != 0:
        raise ValueError("grid must start at 0")
    inc = seed.generator(*subkeys).standard_normal(t.size - 1) * np.sqrt(np.diff(t))
    return SamplePath(t, np.concatenate(([0.0], np.cumsum(inc))))


def brownian_bridge_at(seed: SeedSpec, times, *subkeys: int) -> SamplePath:
    """Brownian bridge on an arbitrary grid of ``[0, 1]``."""
    b = brownian_at(seed, times, *subkeys)
    t = b.times
    if t[-1] != 1.0:
        raise ValueError("bridge grids must end at 1")
    return SamplePath(t, b.values - t * b.values[-1])


def excursion_coordinates(seed: SeedSpec, times, *subkeys: int) -> np.ndarray:
    """Three independent bridges on ``times``, shape ``(3, n)``; their norm is an excursion."""
    return np.stack([brownian_bridge_at(seed, times, *subkeys, 1000 + k).values for k in range(3)])


def clock_integral(path: SamplePath, kappa: float) -> LocalTimeCurve:
    """Trapezoid rule for ``int_0^s |path|^kappa``, anchored at the first node."""
    rate = np.abs(path.values) ** kappa
    cells = 0.5 * (rate[1:] + rate[:-1]) * np.diff(path.times)
    return LocalTimeCurve(path.times, np.concatenate(([0.0], np.cumsum(cells))))


def invert_clock(times, clock, targets) -> np.ndarray:
    """``inf{s : clock(s) > t}`` for a piecewise-linear nondecreasing clock.

    A target equal to the final clock value maps to the first time the
    clock attains it.  Targets above the final value raise
    :class:`HorizonError`.
    """
    times = np.asarray(times, dtype=float)
    clock = np.asarray(clock, dtype=float)
    targets = np.asarray(targets, dtype=float)
    top = clock[-1]
    if np.any(targets > top):
        raise HorizonError(
            f"clock reaches only {top:.6g}, below requested {targets.max():.6g}",
            attained=float(top),
        )
    j = np.searchsorted(clock, targets, side="right")
    at_top = j >= clock.size
    j[at_top] = np.searchsorted(clock, targets[at_top], side="left")
    j = np.clip(j, 1, clock.size - 1)
    lo, hi = clock[j - 1], clock[j]
    span = hi - lo
    frac = np.divide(targets - lo, span, out=np.ones_like(targets), where=span > 0)
    frac = np.clip(frac, 0.0, 1.0)
    out = times[j - 1] + frac * (times[j] - times[j - 1])
    out[targets <= clock[0]] = times[0]
    return out


def power_time_change(Ubar: SamplePath, kappa: float, target: GridSpec):
    """Run ``Ubar`` on the clock ``int |Ubar|^kappa``.

    Returns ``(U, eta)`` with ``eta(t) = inf{s : int_0^s |Ubar|^kappa > t}``
    and ``U_t = Ubar(eta(t))`` on the target grid.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    clock = clock_integral(Ubar, kappa)
    t = target.times()
    eta = invert_clock(Ubar.times, clock.values, t)
    eta = np.maximum.accumulate(eta)
    eta[0] = 0.0
    u = np.interp(eta, Ubar.times, Ubar.values)
    return SamplePath(t, u), LocalTimeCurve(t, eta)


def bridge_refine(path: SamplePath, cells: np.ndarray, pieces: np.ndarray,
                  gen: np.random.Generator) -> SamplePath:
    """Split cell ``cells[i]`` into ``pieces[i]`` equal parts by Brownian bridge sampling.

    Interior values are drawn conditionally on the cell endpoints, so the
    refined path has the law of a Brownian path observed on the finer grid.
    """
    cells = np.asarray(cells, dtype=np.int64)
    pieces = np.asarray(pieces, dtype=np.int64)
    keep = pieces > 1
    cells, pieces = cells[keep], pieces[keep]
    if cells.size == 0:
        return path
    t, v = path.times, path.values
    t0, t1 = t[cells], t[cells + 1]
    v0, v1 = v[cells], v[cells + 1]
    total = int(pieces.sum())
    owner = np.repeat(np.arange(cells.size), pieces)
    first = np.concatenate(([0], np.cumsum(pieces)[:-1]))
    k = np.arange(total) - first[owner] + 1  # 1..pieces within each cell
    h = (t1 - t0) / pieces
    z = gen.standard_normal(total) * np.sqrt(h[owner])
    walk = np.cumsum(z)
    walk -= np.repeat(np.concatenate(([0.0], walk[np.cumsum(pieces)[:-1] - 1])), pieces)
    end = walk[np.cumsum(pieces) - 1]
    frac = k / pieces[owner]
    vals = v0[owner] + walk - frac * (end[owner] - (v1 - v0)[owner])
    times = t0[owner] + k * h[owner]
    interior = k < pieces[owner]
    new_t = np.concatenate((t, times[interior]))
    new_v = np.concatenate((v, vals[interior]))
    order = np.argsort(new_t, kind="stable")
    return SamplePath(new_t[order], new_v[order])


def refine_for_clock(Ubar: SamplePath, kappa: float, max_clock_step: float,
                     gen: np.random.Generator, horizon: float | None = None,
                     max_rounds: int = 8) -> SamplePath:
    """Bridge-refine ``Ubar`` until no cell advances the clock by more than ``max_clock_step``.

    Only cells whose clock value starts below ``horizon`` are refined.
    """
    for _ in range(max_rounds):
        clock = clock_integral(Ubar, kappa).values
        inc = np.diff(clock)
        live = clock[:-1] <= (np.inf if horizon is None else horizon)
        bad = np.flatnonzero(live & (inc > max_clock_step))
        if bad.size == 0:
            break
        pieces = np.ceil(inc[bad] / max_clock_step).astype(np.int64) + 1
        Ubar = bridge_refine(Ubar, bad, pieces, gen)
    return Ubar


def dds_transform(M: SamplePath, n_steps: int | None = None,
                  horizon: float | None = None) -> SamplePath:
    """Run ``M`` on the inverse of its discrete quadratic variation.

    ``beta_t = M(rho(t))`` with ``rho(t) = inf{s : QV(M)_s > t}`` on a uniform
    grid of ``[0, horizon]``; the horizon defaults to the total QV.
    """
    qv = quadratic_variation(M).values
    total = qv[-1]
    if total <= 0:
        raise HorizonError("quadratic variation is identically zero", attained=0.0)
    if horizon is None:
        horizon = total
    if horizon > total:
        raise HorizonError(
            f"quadratic variation reaches only {total:.6g} < {horizon:.6g}", attained=float(total)
        )
    grid = GridSpec(horizon, n_steps or len(M) - 1)
    rho = invert_clock(M.times, qv, grid.times())
    return SamplePath(grid.times(), np.interp(rho, M.times, M.values))
