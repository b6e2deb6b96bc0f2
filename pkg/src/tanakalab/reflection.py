"""Two-sided reflection of a path between a lower and an upper envelope.

For continuous ``f <= g`` with ``f(0) = g(0)`` there is exactly one continuous
``h`` squeezed between them that only moves when pushed: nondecreasing off
``{h = g}``, nonincreasing off ``{h = f}``.  Its value at ``t`` is found by
walking backward from ``t`` until the ranges swept by ``f`` and ``g`` meet:

    F(s, t) = max f on [s, t],  G(s, t) = min g on [s, t],
    d(t) = sup{s <= t : F(s, t) >= G(s, t)},  h(t) = F(d(t), t) = G(d(t), t).

On a piecewise-linear band the same path is produced by projecting the
previous value onto each new node interval, which is what
:func:`reflection_map` does in O(n).  :func:`reflection_map_naive` evaluates
the backward formula at every node and serves as the independent oracle.

The module also holds the clock synchronizer that interlaces two
nondecreasing clocks: ``alpha(t) = inf{u : Vbar(u) >= Sbar(t - u)}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ClockError, EnvelopeError, GridMismatchError, OutOfRangeError
from .pathkit import SamplePath

__all__ = [
    "ConeEnvelope",
    "MonotoneClock",
    "running_envelope",
    "backtrack_index",
    "reflection_map",
    "reflection_map_naive",
    "total_variation",
    "minimality_witness",
    "clock_breakpoints",
    "synchronize_clocks",
    "split_time",
    "synchronization_residual",
]


class MonotoneClock(SamplePath):
    """A nondecreasing path (time change or level clock)."""

    def _check(self):
        if np.any(np.diff(self.values) < 0):
            raise ClockError("clock values must be nondecreasing")


@dataclass(frozen=True, eq=False)
class ConeEnvelope:
    """Lower and upper envelopes on a shared grid, pinched at time 0."""

    lower: SamplePath
    upper: SamplePath

    def __post_init__(self):
        if not self.lower.same_grid(self.upper):
            raise GridMismatchError("envelopes must share a grid")
        f, g = self.lower.values, self.upper.values
        if f[0] != g[0]:
            raise EnvelopeError(f"envelope not pinched at start: {f[0]!r} != {g[0]!r}")
        if np.any(f > g):
            i = int(np.argmax(f > g))
            raise EnvelopeError(f"lower exceeds upper at node {i}: {f[i]!r} > {g[i]!r}")

    @classmethod
    def from_arrays(cls, times, lower, upper) -> "ConeEnvelope":
        return cls(SamplePath(times, lower), SamplePath(times, upper))

    @property
    def times(self) -> np.ndarray:
        return self.lower.times


def running_envelope(f: SamplePath, g: SamplePath, s: float, t: float):
    """``(max f, min g)`` over ``[s, t]`` for the interpolated paths."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    times = f.times
    if s < times[0] or t > times[-1]:
        raise OutOfRangeError("interval outside grid span")
    i = np.searchsorted(times, s, side="right")
    j = np.searchsorted(times, t, side="left")
    fs, ft = np.interp([s, t], times, f.values)
    gs, gt = np.interp([s, t], times, g.values)
    F = max(fs, ft, f.values[i:j].max(initial=-np.inf))
    G = min(gs, gt, g.values[i:j].min(initial=np.inf))
    return float(F), float(G)


@njit(cache=True)
def _scan_back(times, f, g, j_start, tp, fp, gp):
    # Walk backward from a point (tp, fp, gp) over nodes j_start, j_start-1, ...
    # Returns (d, h).
    F = fp
    G = gp
    if F >= G:
        return tp, F
    t_prev = tp
    f_prev = fp
    g_prev = gp
    for j in range(j_start, -1, -1):
        fj = f[j]
        gj = g[j]
        if fj >= G:
            s = times[j] + (fj - G) / (fj - f_prev) * (t_prev - times[j])
            return s, G
        if gj <= F:
            s = times[j] + (F - gj) / (g_prev - gj) * (t_prev - times[j])
            return s, F
        if fj >= gj:
            return times[j], fj
        if fj > F:
            F = fj
        if gj < G:
            G = gj
        t_prev = times[j]
        f_prev = fj
        g_prev = gj
    return times[0], f[0]


@njit(cache=True)
def _naive_all(times, f, g):
    n = f.size
    h = np.empty(n)
    d = np.empty(n)
    for i in range(n):
        di, hi = _scan_back(times, f, g, i - 1, times[i], f[i], g[i])
        d[i] = di
        h[i] = hi
    return h, d


@njit(cache=True)
def _project_forward(f, g):
    n = f.size
    h = np.empty(n)
    h[0] = f[0]
    x = f[0]
    for i in range(1, n):
        if x < f[i]:
            x = f[i]
        if x > g[i]:
            x = g[i]
        h[i] = x
    return h


def backtrack_index(env: ConeEnvelope, t: float) -> float:
    """``d(t)``: the last time before ``t`` where the swept ranges of f and g meet."""
    return _backtrack(env, t)[0]


def _backtrack(env, t):
    times = env.times
    if t < times[0] or t > times[-1]:
        raise OutOfRangeError(f"t={t} outside grid span")
    f, g = env.lower.values, env.upper.values
    k = int(np.searchsorted(times, t, side="right")) - 1
    if times[k] == t:
        return _scan_back(times, f, g, k - 1, t, f[k], g[k])
    fp = float(np.interp(t, times, f))
    gp = float(np.interp(t, times, g))
    return _scan_back(times, f, g, k, float(t), fp, gp)


def reflection_map(env: ConeEnvelope) -> SamplePath:
    """The reflected path between ``env.lower`` and ``env.upper`` (O(n))."""
    h = _project_forward(env.lower.values, env.upper.values)
    return SamplePath(env.times, h)


def reflection_map_naive(env: ConeEnvelope, return_index: bool = False):
    """Backward-scan evaluation of the reflected path at every node.

    Worst case O(n^2).  With ``return_index`` also returns ``d`` at the nodes.
    """
    h, d = _naive_all(env.times, env.lower.values, env.upper.values)
    path = SamplePath(env.times, h)
    return (path, d) if return_index else path


def total_variation(path) -> float:
    """Sum of absolute grid increments (exact for piecewise-linear paths)."""
    v = path.values if isinstance(path, SamplePath) else np.asarray(path, dtype=float)
    return float(np.abs(np.diff(v)).sum())


def minimality_witness(env: ConeEnvelope, h_alt: SamplePath, atol: float = 0.0):
    """Total variation of the reflected path and of an admissible alternative.

    ``h_alt`` must start at the pinch point and stay inside the envelope.
    """
    if not h_alt.same_grid(env.lower):
        raise GridMismatchError("alternative path must share the envelope grid")
    f, g, h = env.lower.values, env.upper.values, h_alt.values
    if h[0] != f[0]:
        raise EnvelopeError("alternative path must start at the pinch point")
    if np.any(h < f - atol) or np.any(h > g + atol):
        raise EnvelopeError("alternative path leaves the envelope")
    return total_variation(reflection_map(env)), total_variation(h_alt)


def _as_clock(c) -> MonotoneClock:
    if isinstance(c, MonotoneClock):
        return c
    try:
        return MonotoneClock(c.times, c.values)
    except ClockError:
        raise
    except ValueError as exc:  # pragma: no cover - SamplePath validation
        raise ClockError(str(exc)) from exc


@njit(cache=True)
def _interlace(tv, v, ts, s):
    nv = tv.size
    ns = ts.size
    cap = 2 * (nv + ns) + 2
    T = np.empty(cap)
    A = np.empty(cap)
    i = 0
    j = 0
    a = tv[0]
    b = ts[0]
    lev = v[0]
    m = 0
    T[m] = a + b
    A[m] = a
    m += 1
    while i < nv - 1 and j < ns - 1:
        dv = v[i + 1] - v[i]
        ds = s[j + 1] - s[j]
        if ds == 0.0:
            # shared or S-only plateau: S moves first (leftmost alpha)
            b = ts[j + 1]
            j += 1
        elif dv == 0.0:
            a = tv[i + 1]
            i += 1
        else:
            rv = v[i + 1] - lev
            rs = s[j + 1] - lev
            if rv < rs:
                lev = v[i + 1]
                a = tv[i + 1]
                i += 1
                b = ts[j] + (lev - s[j]) / ds * (ts[j + 1] - ts[j])
            elif rs < rv:
                lev = s[j + 1]
                b = ts[j + 1]
                j += 1
                a = tv[i] + (lev - v[i]) / dv * (tv[i + 1] - tv[i])
            else:
                lev = v[i + 1]
                a = tv[i + 1]
                b = ts[j + 1]
                i += 1
                j += 1
        T[m] = a + b
        A[m] = a
        m += 1
    return T[:m], A[:m]


def clock_breakpoints(Vbar, Sbar):
    """Breakpoints ``(t_k, alpha_k)`` of the interlacing time change.

    ``alpha`` is piecewise linear in ``t`` between consecutive breakpoints.
    Both clocks must start at time 0 with value 0.
    """
    V = _as_clock(Vbar)
    S = _as_clock(Sbar)
    if V.times[0] != 0 or S.times[0] != 0:
        raise ClockError("clocks must start at time 0")
    if V.values[0] != 0 or S.values[0] != 0:
        raise ClockError("clocks must start at level 0")
    T, A = _interlace(V.times, V.values, S.times, S.values)
    # rounding in a + b can break monotonicity by an ulp
    return np.maximum.accumulate(T), np.maximum.accumulate(A)


def _search_beta(t, a, b, steps):
    # nearest beta within ``steps`` ulps of b with a + beta == t; nan if none
    out = np.full(b.shape, np.nan)
    hit = a + b == t
    out[hit] = b[hit]
    up, down = b.copy(), b.copy()
    for _ in range(steps):
        if not np.isnan(out).any():
            break
        up = np.nextafter(up, np.inf)
        down = np.nextafter(down, -np.inf)
        for cand in (up, down):
            hit = np.isnan(out) & (a + cand == t)
            out[hit] = cand[hit]
    return out


def split_time(t, alpha):
    """Split ``t`` as ``alpha + beta`` exactly in floating point.

    ``beta`` starts at ``t - alpha`` and moves by a few ulps if needed.  When
    every candidate sum is a rounding tie that lands on the wrong neighbour
    of ``t``, ``alpha`` itself moves by one ulp.  Returns ``(alpha, beta)``.
    """
    t = np.asarray(t, dtype=float)
    shape = np.broadcast(t, np.asarray(alpha)).shape
    t = np.broadcast_to(t, shape).ravel()
    a = np.broadcast_to(np.asarray(alpha, dtype=float), shape).ravel().copy()
    b = _search_beta(t, a, t - a, 8)
    for direction in (-np.inf, np.inf):
        miss = np.isnan(b)
        if not miss.any():
            break
        a2 = np.clip(np.nextafter(a[miss], direction), 0.0, t[miss])
        b2 = _search_beta(t[miss], a2, t[miss] - a2, 8)
        ok = ~np.isnan(b2)
        idx = np.nonzero(miss)[0][ok]
        a[idx], b[idx] = a2[ok], b2[ok]
    if np.isnan(b).any():
        raise ClockError("cannot split t exactly into alpha + beta")
    if shape == ():
        return float(a[0]), float(b[0])
    return a.reshape(shape), b.reshape(shape)


def synchronize_clocks(Vbar, Sbar, t, breakpoints=None):
    """Interlace two clocks: ``alpha(t) = inf{u : Vbar(u) >= Sbar(t - u)}``, ``beta = t - alpha``.

    ``t`` may be a scalar or an array.  Where the two clocks share a plateau,
    the ``Sbar`` plateau is consumed first (the leftmost ``alpha``).
    Precomputed ``breakpoints`` from :func:`clock_breakpoints` may be passed.
    """
    T, A = breakpoints if breakpoints is not None else clock_breakpoints(Vbar, Sbar)
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0) or np.any(ta > T[-1]):
        raise ClockError(f"t outside the synchronizable range [0, {T[-1]:.6g}]")
    alpha = np.interp(ta, T, A)
    alpha = np.clip(alpha, 0.0, ta)
    return split_time(ta, alpha)


def synchronization_residual(Vbar, Sbar, alpha, beta):
    """``|Vbar(alpha) - Sbar(beta)|`` and the oscillation of the cells holding ``alpha`` and ``beta``.

    Interlacing is exact on piecewise-linear clocks up to rounding, so the
    residual should never exceed the larger of the two cell oscillations.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    tv, vv = Vbar.times, Vbar.values
    ts, sv = Sbar.times, Sbar.values
    resid = np.abs(np.interp(alpha, tv, vv) - np.interp(beta, ts, sv))
    jv = np.clip(np.searchsorted(tv, alpha, side="right") - 1, 0, tv.size - 2)
    js = np.clip(np.searchsorted(ts, beta, side="right") - 1, 0, ts.size - 2)
    tol = np.maximum(np.diff(vv)[jv], np.diff(sv)[js])
    return resid, tol
