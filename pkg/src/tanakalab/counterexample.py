"""The non-dominated pair (U, W), its envelope process and the (U, V) assembly.

Pipeline for one seed:

1. ``build_pair``: a Brownian source path ``Ubar`` run on the clock
   ``int |Ubar|^kappa`` gives ``U``; ``W`` is an independent Brownian motion
   on the same target grid.
2. ``zero_interpolant``: ``K = -W`` on the zero set of ``U``, linear between
   zeros, constant outside the first and last zero.
3. ``envelope_process``: ``L`` is the two-sided reflection of the cone
   ``-W - |U| <= L <= -W + |U|``.
4. ``assemble_pair``: the clock ``Vbar`` (half the sum of the local times of
   ``|U| +- (L + W)``) is interlaced with the running maximum ``Sbar`` of an
   independent Brownian motion ``Bbar``; ``Y`` integrates
   ``-sign_0(L + W)`` against ``B`` and ``V = Y + W``.

Random streams (all under ``SeedSpec(seed, stream_index)``): subkey 1 for
``Ubar`` (one sub-stream per extension chunk), 2 for ``W``, 3 for ``Bbar``,
4 for bridge refinement of ``Ubar``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import ClockError, GridMismatchError, HorizonError
from .pathkit import (
    ExcursionSet,
    LocalTimeCurve,
    SamplePath,
    excursions,
    local_time_zero,
    quadratic_variation,
    write_path_csv,
    zero_points,
)
from .reflection import (
    ConeEnvelope,
    MonotoneClock,
    clock_breakpoints,
    reflection_map,
    synchronization_residual,
    synchronize_clocks,
    total_variation,
)
from .stochgen import (
    GridSpec,
    SeedSpec,
    brownian,
    brownian_increments,
    clock_integral,
    power_time_change,
    refine_for_clock,
)

__all__ = [
    "CounterexampleBundle",
    "ViolationCensus",
    "IdentityResiduals",
    "AssembledPair",
    "build_pair",
    "coarsen_bundle",
    "zero_interpolant",
    "cone_census",
    "envelope_process",
    "local_time_pair",
    "cone_overshoot",
    "verify_identities",
    "assemble_pair",
    "build_bundle",
    "complete_bundle",
    "bundle_diagnostics",
    "dump_bundle",
]

SUBKEY_UBAR, SUBKEY_W, SUBKEY_B, SUBKEY_REFINE = 1, 2, 3, 4


@dataclass(frozen=True, eq=False)
class CounterexampleBundle:
    """All paths of one counterexample run; later stages fill the ``None`` fields.

    ``Ubar`` lives on its own (refined) source grid; every other path lives on
    the target grid except ``Bbar``/``Sbar`` and the assembled ``Y``/``V``.
    ``Wbar`` is the Brownian input for ``W`` and coincides with it.
    """

    kappa: float
    seed: SeedSpec
    Ubar: SamplePath
    Wbar: SamplePath
    U: SamplePath
    W: SamplePath
    eta: LocalTimeCurve
    K: SamplePath | None = None
    L: SamplePath | None = None
    Vbar: LocalTimeCurve | None = None
    Bbar: SamplePath | None = None
    Sbar: MonotoneClock | None = None
    Y: SamplePath | None = None
    V: SamplePath | None = None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.U.t_end, len(self.U) - 1)


@dataclass(frozen=True, eq=False)
class ViolationCensus:
    """Complete excursions of ``U`` on which ``|K + W|`` exceeds ``|U|`` somewhere."""

    violating_intervals: ExcursionSet
    max_overshoot: float
    total_excursions: int
    per_excursion_max: np.ndarray

    @property
    def violating_count(self) -> int:
        return len(self.violating_intervals)


@dataclass(frozen=True)
class IdentityResiduals:
    """Residuals of the discrete identities (all sup norms unless noted).

    local_time_identity : ``sup |2L - (L0(|U| + L + W) - L0(|U| - L - W))|``.
    cone_overshoot : ``sup (|L + W| - |U|)^+`` over the interpolated paths.
    frozen_u_residual : share of ``sum |dU|`` on output cells starting in
        ``{|V| >= |U|}``, where ``U`` should be frozen (``nan`` before assembly).
    alpha_flat_share : share of ``sum |dU|`` on output cells where the clock
        ``alpha`` is flat (0 by construction; ``nan`` before assembly).
    balayage_share : ``frozen_u_residual`` with ``Y`` replaced by its
        integrated form ``L - xi (S - B)``, ``xi = -sign(L + W)``
        (diagnostic, ``nan`` before assembly).
    zero_set_residual : ``|sum over cells touching {U = 0}`` of
        ``dL0(|U| + L + W) - dL0(|U| - L - W)|`` (diagnostic).
    """

    local_time_identity: float
    cone_overshoot: float
    frozen_u_residual: float = float("nan")
    alpha_flat_share: float = float("nan")
    balayage_share: float = float("nan")
    zero_set_residual: float = float("nan")

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class AssembledPair:
    """The interlaced processes on the output grid ``times``."""

    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    U: SamplePath
    V: SamplePath
    W: SamplePath
    L: SamplePath
    Y: SamplePath
    B: SamplePath
    S: SamplePath
    clock: SamplePath
    sync_residual: float


def _check_grid(*paths):
    for p in paths[1:]:
        if not paths[0].same_grid(p):
            raise GridMismatchError("paths must share the target grid")


def _extend_source(seed: SeedSpec, kappa: float, source_dt: float, chunk: float,
                   level: float, max_chunks: int) -> SamplePath:
    # append Brownian chunks until the clock exceeds ``level``, then trim
    n_chunk = max(2, int(round(chunk / source_dt)))
    dt = chunk / n_chunk
    values = [np.zeros(1)]
    last = 0.0
    clock = 0.0
    for c in range(max_chunks):
        inc = brownian_increments(seed.generator(SUBKEY_UBAR, c), n_chunk, dt)
        vals = last + np.cumsum(inc)
        prev = np.concatenate(([last], vals[:-1]))
        rate = 0.5 * (np.abs(prev) ** kappa + np.abs(vals) ** kappa) * dt
        cum = clock + np.cumsum(rate)
        values.append(vals)
        if cum[-1] > level:
            k = int(np.argmax(cum > level))
            values[-1] = vals[: k + 1]
            v = np.concatenate(values)
            return SamplePath(np.arange(v.size) * dt, v)
        last, clock = vals[-1], cum[-1]
    raise HorizonError(
        f"clock reached only {clock:.6g} < {level:.6g} after {max_chunks} chunks of length {chunk}",
        attained=float(clock),
    )


def build_pair(seed, grid: GridSpec, kappa: float = 12.0, *, source_dt: float = 2.0**-10,
               chunk: float = 4.0, safety: float = 1.25, max_chunks: int = 256,
               refine_rounds: int = 8, oversample: int = 8) -> CounterexampleBundle:
    """Sample ``Ubar``, ``U = Ubar(eta)`` and an independent ``W`` on ``grid``.

    The source path is generated on a step ``source_dt`` in chunks of length
    ``chunk`` until its clock exceeds ``safety * grid.t_end``; it is then
    bridge-refined so that no source cell advances the clock by more than
    ``1 / oversample`` of the target mesh.  Reading ``U`` off a coarser source
    by interpolation would lose about a third of the quadratic variation.

    Parameters
    ----------
    seed : SeedSpec or int
    grid : GridSpec
        Target grid for ``U`` and ``W``.
    kappa : float
        Exponent of the clock; 0 gives ``U`` Brownian.

    Raises
    ------
    HorizonError
        The clock does not reach the horizon within ``max_chunks`` chunks.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    ubar = _extend_source(seed, kappa, source_dt, chunk, safety * grid.t_end, max_chunks)
    ubar = refine_for_clock(ubar, kappa, grid.dt / oversample, seed.generator(SUBKEY_REFINE),
                            horizon=grid.t_end, max_rounds=refine_rounds)
    U, eta = power_time_change(ubar, kappa, grid)
    W = brownian(seed, grid, SUBKEY_W)
    return CounterexampleBundle(kappa, seed, ubar, W, U, W, eta)


def coarsen_bundle(bundle: CounterexampleBundle, factor: int) -> CounterexampleBundle:
    """The pair seen on every ``factor``-th target node (same underlying paths)."""
    grid = bundle.grid.coarsen(factor)  # validates divisibility
    W = bundle.W.subsample(factor)
    out = CounterexampleBundle(bundle.kappa, bundle.seed, bundle.Ubar, W,
                               bundle.U.subsample(factor), W, bundle.eta.subsample(factor))
    assert len(out.U) == grid.n_steps + 1
    return out


def zero_interpolant(U: SamplePath, W: SamplePath) -> SamplePath:
    """``K = -W`` on the zeros of ``U``, linear between them, constant outside.

    Zeros inside a cell are located by linear interpolation of ``U`` and the
    value of ``W`` there is interpolated too.
    """
    _check_grid(U, W)
    z, node = zero_points(U)
    if z.size == 0:
        raise ValueError("U has no zeros on its grid")
    wz = np.where(node >= 0, W.values[np.maximum(node, 0)], np.interp(z, W.times, W.values))
    return SamplePath(U.times, np.interp(U.times, z, -wz))


def _complete_excursions(U: SamplePath) -> ExcursionSet:
    exc = excursions(U)
    z, _ = zero_points(U)
    return exc.restrict(z[-1]) if z.size else exc.restrict(U.t_start)


def cone_census(K: SamplePath, W: SamplePath, U: SamplePath) -> ViolationCensus:
    """Excursions of ``U`` on which ``|K + W| > |U|`` at some interior node.

    Only complete excursions (both ends zeros of ``U``) are examined; an
    excursion without interior nodes cannot be resolved and never violates.
    """
    _check_grid(K, W, U)
    exc = _complete_excursions(U)
    n = len(exc)
    t = U.times
    gap = np.abs(K.values + W.values) - np.abs(U.values)
    per = np.full(n, -np.inf)
    if n:
        k = np.searchsorted(exc.starts, t, side="left") - 1
        kk = np.maximum(k, 0)
        inside = (k >= 0) & (t > exc.starts[kk]) & (t < exc.ends[kk])
        np.maximum.at(per, k[inside], gap[inside])
    bad = per > 0
    viol = ExcursionSet(exc.starts[bad], exc.ends[bad], exc.domain_end)
    max_over = float(per[bad].max()) if bad.any() else 0.0
    return ViolationCensus(viol, max_over, n, per)


def envelope_process(U: SamplePath, W: SamplePath) -> SamplePath:
    """Reflection of the cone ``-W - |U| <= L <= -W + |U|``.

    Raises :class:`EnvelopeError` if the cone is not pinched at the start.
    """
    _check_grid(U, W)
    au = np.abs(U.values)
    env = ConeEnvelope(SamplePath(U.times, -W.values - au), SamplePath(U.times, -W.values + au))
    return reflection_map(env)


def local_time_pair(U: SamplePath, W: SamplePath, L: SamplePath):
    """Tanaka local times at 0 of ``|U| + (L + W)`` and ``|U| - (L + W)``.

    Both processes are formed as distances to the cone walls so that a
    touching node is exactly zero.
    """
    au = np.abs(U.values)
    f = -W.values - au
    g = -W.values + au
    xp = np.maximum(L.values - f, 0.0)
    xm = np.maximum(g - L.values, 0.0)
    return local_time_zero(U.with_values(xp)), local_time_zero(U.with_values(xm))


def _cell_max_gap(t0, t1, a0, a1, u0, u1):
    # max of |a| - |u| over [t0, t1] for linear a, u: check ends and sign changes
    cand = [np.abs(a0) - np.abs(u0), np.abs(a1) - np.abs(u1)]
    for x0, x1 in ((a0, a1), (u0, u1)):
        cross = x0 * x1 < 0
        w = np.where(cross, x0 / np.where(cross, x0 - x1, 1.0), 0.0)
        aw = a0 + w * (a1 - a0)
        uw = u0 + w * (u1 - u0)
        cand.append(np.where(cross, np.abs(aw) - np.abs(uw), -np.inf))
    return np.max(np.stack(cand), axis=0)


def cone_overshoot(U: SamplePath, W: SamplePath, L: SamplePath) -> float:
    """``sup (|L + W| - |U|)^+`` over the linearly interpolated paths.

    At nodes the reflection keeps ``|L + W| <= |U|`` up to rounding; inside a
    cell where ``U`` crosses zero the interpolants can disagree, which is the
    discretization error this measures.
    """
    _check_grid(U, W, L)
    a = L.values + W.values
    u = U.values
    t = U.times
    gap = _cell_max_gap(t[:-1], t[1:], a[:-1], a[1:], u[:-1], u[1:])
    return float(max(gap.max(), 0.0))


def verify_identities(bundle: CounterexampleBundle, pair: AssembledPair | None = None
                      ) -> IdentityResiduals:
    """Residuals of the local-time identity, the cone bound and the frozen-U property.

    ``bundle`` needs ``L``; ``pair`` (from :func:`assemble_pair`) enables the
    assembly residuals.
    """
    U, W, L = bundle.U, bundle.W, bundle.L
    if L is None:
        raise ValueError("bundle has no envelope process; run build_bundle first")
    lp, lm = local_time_pair(U, W, L)
    r_a = float(np.max(np.abs(2.0 * L.values - (lp.values - lm.values)))) if len(L) else 0.0
    r_b = cone_overshoot(U, W, L)

    # cells touching the zero set of U
    u = U.values
    touch = (u[:-1] == 0) | (u[1:] == 0) | (u[:-1] * u[1:] < 0)
    d = np.diff(lp.values) - np.diff(lm.values)
    r_d = float(abs(d[touch].sum()))

    r_c = r_flat = r_bal = float("nan")
    if pair is not None:
        u = pair.U.values
        du = np.abs(np.diff(u))
        total = du.sum()

        def share(mask):
            return float(du[mask].sum() / total) if total > 0 else 0.0

        r_c = share(np.abs(pair.V.values[:-1]) >= np.abs(u[:-1]))
        r_flat = share(np.diff(pair.alpha) == 0)
        # integrated form of Y: L - Y = xi (S - B) with xi frozen while alpha is
        xi = -np.sign(pair.L.values + pair.W.values)
        v_bal = pair.L.values - xi * (pair.S.values - pair.B.values) + pair.W.values
        r_bal = share(np.abs(v_bal[:-1]) >= np.abs(u[:-1]))
    return IdentityResiduals(r_a, r_b, r_c, r_flat, r_bal, r_d)


def build_bundle(seed, grid: GridSpec, kappa: float = 12.0, **kwargs) -> CounterexampleBundle:
    """:func:`build_pair` followed by ``K``, ``L`` and the clock ``Vbar``."""
    return complete_bundle(build_pair(seed, grid, kappa, **kwargs))


def complete_bundle(bundle: CounterexampleBundle) -> CounterexampleBundle:
    """Fill ``K``, ``L`` and ``Vbar`` from ``U`` and ``W``."""
    U, W = bundle.U, bundle.W
    K = zero_interpolant(U, W)
    L = envelope_process(U, W)
    lp, lm = local_time_pair(U, W, L)
    vbar = 0.5 * (lp.values + lm.values)
    return replace(bundle, K=K, L=L, Vbar=LocalTimeCurve(U.times, vbar))


def assemble_pair(bundle: CounterexampleBundle, seed=None, Bbar: SamplePath | None = None,
                  n_out: int | None = None) -> tuple[CounterexampleBundle, AssembledPair]:
    """Interlace ``(U, W, L)`` with an independent Brownian ``Bbar``.

    ``Bbar`` defaults to a Brownian path on the target grid drawn from
    ``seed`` (default: the bundle's seed).  The output grid is uniform with
    ``n_out`` steps (default: the target step count) over the range on which
    both clocks are defined.

    Returns the bundle with ``Bbar``, ``Sbar``, ``Y``, ``V`` filled, and the
    full :class:`AssembledPair`.

    Raises
    ------
    ClockError
        The clocks cannot be interlaced or ``Vbar(alpha) != Sbar(beta)``
        beyond one cell's oscillation.
    """
    if bundle.Vbar is None:
        bundle = complete_bundle(bundle)
    grid = bundle.grid
    if Bbar is None:
        sd = bundle.seed if seed is None else (seed if isinstance(seed, SeedSpec) else SeedSpec(seed))
        Bbar = brownian(sd, grid, SUBKEY_B)
    Sbar = MonotoneClock(Bbar.times, np.maximum.accumulate(Bbar.values))
    vclock = MonotoneClock(bundle.Vbar.times, bundle.Vbar.values)
    T, A = clock_breakpoints(vclock, Sbar)
    t_max = float(T[-1])
    if not t_max > 0:
        raise ClockError("interlaced clock has empty range")
    n_out = n_out or grid.n_steps
    times = GridSpec(t_max, n_out).times()
    times[-1] = t_max
    alpha, beta = synchronize_clocks(vclock, Sbar, times, breakpoints=(T, A))
    alpha = np.minimum(alpha, vclock.t_end)
    beta = np.minimum(beta, Sbar.t_end)

    resid, tol = synchronization_residual(vclock, Sbar, alpha, beta)
    tol = tol + 1e-12
    va = np.interp(alpha, vclock.times, vclock.values)
    sb = np.interp(beta, Sbar.times, Sbar.values)
    if np.any(resid > tol):
        k = int(np.argmax(resid - tol))
        raise ClockError(
            f"clock mismatch {resid[k]:.3g} at t={times[k]:.6g} (alpha={alpha[k]:.6g}, "
            f"beta={beta[k]:.6g}, tolerance {tol[k]:.3g})"
        )

    def at(path, s):
        return np.interp(s, path.times, path.values)

    u, w, l = at(bundle.U, alpha), at(bundle.W, alpha), at(bundle.L, alpha)
    b = at(Bbar, beta)
    xi = -np.sign(l + w)
    y = np.concatenate(([0.0], np.cumsum(xi[:-1] * np.diff(b))))
    v = y + w
    mk = lambda x: SamplePath(times, x)  # noqa: E731
    pair = AssembledPair(times, alpha, beta, mk(u), mk(v), mk(w), mk(l), mk(y), mk(b), mk(sb),
                         mk(va), float(resid.max()))
    out = replace(bundle, Bbar=Bbar, Sbar=Sbar, Y=pair.Y, V=pair.V)
    return out, pair


def bundle_diagnostics(bundle: CounterexampleBundle) -> dict:
    """Scalar summaries: variations, quadratic variations, cone ratio maxima."""
    U = bundle.U
    qv = quadratic_variation(U).values
    dt = np.diff(U.times)
    out = {
        "kappa": bundle.kappa,
        "n_steps": len(U) - 1,
        "qv_U_end": float(qv[-1]),
        "eta_end": float(bundle.eta.values[-1]),
        "max_qv_ratio": float(np.max(np.diff(qv) / dt)),
        "source_nodes": len(bundle.Ubar),
        "source_clock_end": float(clock_integral(bundle.Ubar, bundle.kappa).values[-1]),
    }
    if bundle.K is not None:
        out["tv_K"] = total_variation(bundle.K)
    if bundle.L is not None:
        out["tv_L"] = total_variation(bundle.L)
    if bundle.Vbar is not None:
        out["Vbar_end"] = float(bundle.Vbar.values[-1])
    if bundle.V is not None:
        out["qv_V_end"] = float(quadratic_variation(bundle.V).values[-1])
    return out


def dump_bundle(bundle: CounterexampleBundle, output_dir, residuals: IdentityResiduals | None = None):
    """One CSV per available path plus ``manifest.json``; returns written paths."""
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for name in ("Ubar", "U", "W", "eta", "K", "L", "Vbar", "Bbar", "Sbar", "Y", "V"):
        p = getattr(bundle, name)
        if p is None:
            continue
        dest = os.path.join(output_dir, f"{name}.csv")
        write_path_csv(p, dest, header=("time", name))
        written.append(dest)
    manifest = {
        "kappa": bundle.kappa,
        "seed": bundle.seed.seed,
        "stream_index": bundle.seed.stream_index,
        "grid": {"t_end": bundle.grid.t_end, "n_steps": bundle.grid.n_steps},
        "source_grid_nodes": len(bundle.Ubar),
        "diagnostics": bundle_diagnostics(bundle),
        "residuals": residuals.as_dict() if residuals is not None else None,
    }
    dest = os.path.join(output_dir, "manifest.json")
    with open(dest, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    written.append(dest)
    return written
