"""Excursion counts and power sums of Brownian paths stopped at a local-time level.

For a Brownian path run until its local time at 0 first exceeds ``eps``,
the number ``n_k`` of excursions longer than ``2^-k`` satisfies
``2^{-k/2} n_k -> sqrt(2/pi) eps``; the power sums ``sum |I|^alpha`` stay
bounded under refinement for ``alpha > 1/2`` and diverge (logarithmically) at
``alpha = 1/2``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import HorizonError
from ..pathkit import (
    SamplePath,
    excursion_statistics,
    excursions,
    level_crossing_local_time,
    local_time_zero,
    occupation_local_time,
    stopping_time,
)
from ..report import ExperimentReport
from ..stochgen import GridSpec, SeedSpec, brownian, brownian_increments

__all__ = [
    "LEVY_MEAN",
    "stopped_excursion_row",
    "grow_until_local_time",
    "excursion_scaling",
    "levy_calibration",
]

LEVY_MEAN = math.sqrt(2.0 / math.pi)


def stopped_excursion_row(path: SamplePath, eps: float, k_list, alphas):
    """``(tau, counts, power_sums, n_excursions)`` for ``path`` stopped at local time ``eps``.

    Raises :class:`HorizonError` when the level is not reached.
    """
    tau = stopping_time(local_time_zero(path), eps)
    exc = excursions(path).restrict(tau)
    k_max = max(k_list) if len(k_list) else 0
    sums = []
    counts = None
    for a in alphas:
        ps, counts = excursion_statistics(exc, a, k_max)
        sums.append(ps)
    return tau, [int(counts[k]) for k in k_list], sums, len(exc)


def grow_until_local_time(seed: SeedSpec, mesh: float, eps: float, horizon: float,
                          strides=(1,), chunk: float = 16.0) -> SamplePath:
    """Brownian path on step ``mesh``, extended chunk by chunk until the local time exceeds ``eps``.

    The local time is checked on every strided sub-grid in ``strides``.
    Raises :class:`HorizonError` when ``horizon`` is reached first.
    """
    n_chunk = int(round(chunk / mesh))
    if n_chunk * mesh != chunk:
        raise ValueError("chunk must be a multiple of mesh")
    n_max = int(math.ceil(horizon / mesh))
    parts = [np.zeros(1)]
    last = 0.0
    n = 0
    c = 0
    while n < n_max:
        m = min(n_chunk, n_max - n)
        inc = brownian_increments(seed.generator(1, c), m, mesh)
        vals = last + np.cumsum(inc)
        parts.append(vals)
        last = vals[-1]
        n += m
        c += 1
        v = np.concatenate(parts)
        t = np.arange(v.size) * mesh
        if all(local_time_zero(SamplePath(t[::s], v[::s])).values[-1] > eps for s in strides):
            return SamplePath(t, v)
    v = np.concatenate(parts)
    lt = min(local_time_zero(SamplePath(np.arange(v.size)[::s] * mesh, v[::s])).values[-1]
             for s in strides)
    raise HorizonError(f"local time {lt:.4g} <= {eps} at horizon {horizon}", attained=float(lt))


def excursion_scaling(eps: float, meshes, replicas: int, seed: int, horizon: float = 256.0,
                      k_list=tuple(range(4, 13)), alphas=(0.5, 0.75), k_check: int = 10,
                      contrast_replicas: int = 100, rel_tol: float = 0.15,
                      stable_tol: float = 0.05, growth: float = 1.2) -> ExperimentReport:
    """Excursion counts and power sums across meshes for paths stopped at local time ``eps``.

    Each replica draws one path on the finest mesh; coarser meshes are
    strided views of it.  Replicas whose local time stays below ``eps`` up
    to ``horizon`` at some mesh are skipped and counted.

    Verdicts: mean ``2^{-k/2} n_k`` at ``k_check`` on the finest mesh within
    ``rel_tol`` of ``sqrt(2/pi) eps``; over the first ``contrast_replicas``
    replicas, median power sums at ``alpha = 0.75`` change by less than
    ``stable_tol`` and at ``alpha = 0.5`` grow by at least ``growth`` across
    each of the last two halvings.
    """
    meshes = [float(m) for m in meshes]
    fine = meshes[-1]
    strides = []
    for m in meshes:
        s = m / fine
        if s != int(s):
            raise ValueError("meshes must be integer multiples of the finest mesh")
        strides.append(int(s))
    k_list = list(k_list)
    if k_check not in k_list:
        k_list.append(k_check)
    rows, skipped = [], []
    for r in range(replicas):
        sd = SeedSpec(seed, r)
        try:
            path = grow_until_local_time(sd, fine, eps, horizon, strides)
        except HorizonError:
            skipped.append(r)
            continue
        for m, s in zip(meshes, strides):
            sub = path.subsample(s)
            tau, counts, sums, nexc = stopped_excursion_row(sub, eps, k_list, alphas)
            rows.append([r, m, tau, nexc] + counts + sums)
    cols = (["replica", "mesh", "tau", "n_excursions"] + [f"n_{k}" for k in k_list]
            + [f"power_sum_{a:g}" for a in alphas])
    rep = ExperimentReport("excursions", {
        "epsilon": eps, "mesh_list": meshes, "replicas": replicas, "seed": seed,
        "horizon": horizon, "k_list": k_list, "alphas": list(alphas)})
    rep.add_table("scaling", cols, rows)
    rep.summary["skipped_replicas"] = skipped
    rep.summary["used_replicas"] = replicas - len(skipped)
    if not rows:
        rep.verdict("excursion scaling", False, "no replica reached the local-time level")
        return rep

    data = np.array(rows, dtype=float)
    col = {c: i for i, c in enumerate(cols)}
    fine_rows = data[data[:, 1] == fine]
    target = LEVY_MEAN * eps
    scaled = 2.0 ** (-k_check / 2) * fine_rows[:, col[f"n_{k_check}"]]
    mean = float(scaled.mean())
    se = float(scaled.std(ddof=1) / math.sqrt(scaled.size)) if scaled.size > 1 else math.nan
    rep.verdict(f"2^(-k/2) n_k at k={k_check} near sqrt(2/pi)*eps",
                abs(mean - target) <= rel_tol * target,
                f"mean {mean:.4f} +- {se:.4f} over {scaled.size} replicas vs {target:.4f} "
                f"(tolerance {rel_tol:.0%})", mean, target)
    per_k = []
    for k in k_list:
        v = 2.0 ** (-k / 2) * fine_rows[:, col[f"n_{k}"]]
        per_k.append((k, float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan))
    rep.add_table("scaled_counts", ["k", "mean_scaled_count", "stderr"], per_k)

    used = sorted(set(int(x) for x in data[:, 0]))[:contrast_replicas]
    sel = np.isin(data[:, 0], used)
    med_rows = []
    for a in alphas:
        meds = [float(np.median(data[sel & (data[:, 1] == m), col[f"power_sum_{a:g}"]])) for m in meshes]
        for m, md in zip(meshes, meds):
            med_rows.append((a, m, md))
        ratios = [meds[i + 1] / meds[i] for i in range(len(meds) - 1)]
        rep.summary[f"power_sum_{a:g}_median_ratios"] = ratios
        last2 = ratios[-2:]
        text = ", ".join(f"{x:.4f}" for x in last2)
        if a == 0.75:
            rep.verdict("alpha=0.75 power sums stable", all(abs(x - 1) < stable_tol for x in last2),
                        f"median ratios over last halvings {text} (need |ratio-1| < {stable_tol})",
                        max(abs(x - 1) for x in last2), stable_tol)
        elif a == 0.5:
            rep.verdict("alpha=0.5 power sums grow", all(x >= growth for x in last2),
                        f"median ratios over last halvings {text} (need >= {growth})",
                        min(last2), growth)
    rep.add_table("power_sum_medians", ["alpha", "mesh", "median_power_sum"], med_rows)
    return rep


def levy_calibration(replicas: int, grid: GridSpec, seed: int) -> ExperimentReport:
    """Mean Tanaka local time at 0 of Brownian paths at ``grid.t_end`` against ``sqrt(2 t / pi)``.

    The occupation-density and level-crossing estimators are reported
    alongside as independent cross-checks.
    """
    rows = []
    for r in range(replicas):
        b = brownian(SeedSpec(seed, r), grid, 1)
        rows.append((r, float(local_time_zero(b).values[-1]),
                     float(occupation_local_time(b).values[-1]),
                     float(level_crossing_local_time(b).values[-1])))
    rep = ExperimentReport("levy", {"replicas": replicas, "seed": seed,
                                    "grid": {"t_end": grid.t_end, "n_steps": grid.n_steps}})
    rep.add_table("local_time", ["replica", "tanaka", "occupation", "level_crossing"], rows)
    lt = np.array([x[1] for x in rows])
    oc = np.array([x[2] for x in rows])
    lc = np.array([x[3] for x in rows])
    target = math.sqrt(2.0 * grid.t_end / math.pi)
    mean = float(lt.mean())
    se = float(lt.std(ddof=1) / math.sqrt(lt.size)) if lt.size > 1 else math.inf
    rep.verdict("Tanaka local time mean", abs(mean - target) <= 3 * se,
                f"mean {mean:.5f} +- {se:.5f} vs {target:.5f} (3 standard errors)", mean, target)
    for name, v in (("occupation", oc), ("level-crossing", lc)):
        vse = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.inf
        rep.info(f"{name} local time mean", f"mean {v.mean():.5f} +- {vse:.5f}", float(v.mean()))
    rep.summary.update({"tanaka_mean": mean, "tanaka_stderr": se, "target": target,
                        "occupation_mean": float(oc.mean()),
                        "level_crossing_mean": float(lc.mean())})
    return rep
