"""Acceptance criteria 1 to 11 at their stated sizes and tolerances.

Each test prints one ``[PASS]`` or ``[FAIL]`` line; the lines are repeated
in the terminal summary.  Full-size runs take several minutes in total.
"""

import pytest

from tanakalab.harness import make_config, run_experiment, tail_bound_check
from tanakalab.stochgen import GridSpec

pytestmark = pytest.mark.slow


def record(log, n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


def find(rep, prefix):
    out = [v for v in rep.verdicts if v.name.startswith(prefix)]
    assert out, f"no verdict named {prefix!r}"
    return out[0]


def run_full(experiment, tmp_path_factory):
    cfg = make_config(experiment, output_dir=str(tmp_path_factory.mktemp(experiment)))
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def reflect(tmp_path_factory):
    return run_full("reflect", tmp_path_factory)


@pytest.fixture(scope="module")
def excursions(tmp_path_factory):
    return run_full("excursions", tmp_path_factory)


@pytest.fixture(scope="module")
def uniqueness(tmp_path_factory):
    return run_full("uniqueness", tmp_path_factory)


@pytest.fixture(scope="module")
def counterexample(tmp_path_factory):
    return run_full("counterexample", tmp_path_factory)


def test_criterion_01_reflection_oracle(reflect, acceptance_log):
    v = find(reflect, "fast reflection matches")
    _, rows = reflect.tables["oracle"]
    nodes = max(r[1] for r in rows)
    ok = v.status == "pass" and len(rows) == 1000 and nodes <= 10_000
    record(acceptance_log, 1, ok, f"{v.detail}; {len(rows)} envelopes, largest grid {nodes} nodes")


def test_criterion_02_minimality(reflect, acceptance_log):
    v = find(reflect, "reflected path has minimal")
    _, rows = reflect.tables["minimality"]
    record(acceptance_log, 2, v.status == "pass" and len(rows) == 100 * 100, v.detail)


def test_criterion_03_local_time_calibration(excursions, acceptance_log):
    v = find(excursions, "Tanaka local time mean")
    cfg = excursions.config
    ok = (v.status == "pass" and cfg["aux_replicas"] == 10_000
          and cfg["grid"]["t_end"] == 1.0 and cfg["grid"]["n_steps"] == 10_000)
    record(acceptance_log, 3, ok, f"{v.detail} over {cfg['aux_replicas']} paths at mesh 1e-4")


def test_criterion_04_excursion_scaling(excursions, acceptance_log):
    v = find(excursions, "2^(-k/2) n_k at k=10")
    skipped = excursions.summary["scaling"]["skipped_replicas"]
    record(acceptance_log, 4, v.status == "pass",
           f"{v.detail}; {len(skipped)} of 200 seeds did not reach local time 1 by t=256")


def test_criterion_05_power_sum_contrast(excursions, acceptance_log):
    stable = find(excursions, "alpha=0.75 power sums stable")
    grow = find(excursions, "alpha=0.5 power sums grow")
    ok = stable.status == "pass" and grow.status == "pass"
    record(acceptance_log, 5, ok, f"alpha=0.75 {stable.status}: {stable.detail}; "
                                  f"alpha=0.5 {grow.status}: {grow.detail}")


def test_criterion_06_crossing_bound(acceptance_log):
    c = tail_bound_check(0.75, 6.0, 100.0, 100_000, seed=make_config("tails").seed)
    ok = c.empirical <= 0.0355 + 3 * c.stderr
    record(acceptance_log, 6, ok, f"empirical {c.empirical:.5f} +- {c.stderr:.5f} over "
                                  f"{c.replicas} replicas vs 0.0355 (computed bound {c.bound:.6f})")


def test_criterion_07_mirror_coupling(uniqueness, acceptance_log):
    lam1 = find(uniqueness, "lambda=1 coupling converges")
    lam0 = find(uniqueness, "lambda=0 coupling does not converge")
    ok = lam1.status == "pass" and lam0.status == "pass"
    record(acceptance_log, 7, ok, f"lambda=1 {lam1.status}: {lam1.detail}; "
                                  f"lambda=0 {lam0.status}: {lam0.detail}")


def test_criterion_08_variation_dichotomy(counterexample, acceptance_log):
    k0 = find(counterexample, "kappa=0 envelope variation")
    k12 = find(counterexample, "kappa=12 K has bounded")
    ok = k0.status == "pass" and k12.status == "pass"
    record(acceptance_log, 8, ok, f"kappa=0 {k0.status}: {k0.detail}; "
                                  f"kappa=12 {k12.status}: {k12.detail}")


def test_criterion_09_identity_residuals(counterexample, acceptance_log):
    parts = [find(counterexample, p) for p in ("local-time identity residual",
                                               "cone bound overshoot",
                                               "assembled pair frozen-U residual")]
    ok = all(v.status == "pass" for v in parts)
    record(acceptance_log, 9, ok, "; ".join(f"{v.name} {v.status}: {v.detail}" for v in parts))


def test_criterion_10_clock_synchronization(reflect, acceptance_log):
    v = find(reflect, "clock interlacing exact")
    _, rows = reflect.tables["clocks"]
    record(acceptance_log, 10, v.status == "pass" and len(rows) == 1000, v.detail)


SMALL = {
    "uniqueness": dict(replicas=3, mesh_list=(2.0**-7, 2.0**-8)),
    "counterexample": dict(replicas=2, grid=GridSpec(1.0, 2**10), mesh_list=(2.0**-9, 2.0**-10)),
    "reflect": dict(replicas=5, grid=GridSpec(1.0, 300)),
    "tails": dict(replicas=2000, aux_replicas=20, horizon=10.0),
    "excursions": dict(replicas=4, aux_replicas=50, grid=GridSpec(1.0, 500),
                       mesh_list=(2.0**-6, 2.0**-7), epsilon=0.3, horizon=32.0),
}


def test_criterion_11_determinism(tmp_path, acceptance_log):
    differing, compared = [], 0
    for name, kw in SMALL.items():
        reps = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            run_experiment(make_config(name, output_dir=str(out), **kw))
            reps.append(out)
        for csv in sorted(p.name for p in reps[0].glob("*.csv")):
            compared += 1
            if (reps[0] / csv).read_bytes() != (reps[1] / csv).read_bytes():
                differing.append(f"{name}/{csv}")
    ok = not differing and compared > 0
    record(acceptance_log, 11, ok, f"{compared} data CSVs over {len(SMALL)} experiments compared; "
                                   f"differing: {differing or 'none'}")
