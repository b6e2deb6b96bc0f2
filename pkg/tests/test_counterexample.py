import numpy as np
import pytest

from tanakalab.counterexample import (
    CounterexampleBundle,
    assemble_pair,
    build_bundle,
    build_pair,
    bundle_diagnostics,
    coarsen_bundle,
    complete_bundle,
    cone_census,
    dump_bundle,
    envelope_process,
    cone_overshoot,
    verify_identities,
    zero_interpolant,
)
from tanakalab.errors import HorizonError
from tanakalab.pathkit import LocalTimeCurve, SamplePath
from tanakalab.stochgen import GridSpec, SeedSpec, brownian

G = GridSpec(1.0, 2**12)


def flat(grid=G, value=0.0):
    return SamplePath(grid.times(), np.full(grid.n_steps + 1, value))


def test_identity_clock_gives_brownian_u():
    b = build_pair(SeedSpec(1), G, 0.0)
    np.testing.assert_allclose(b.eta.values, G.times(), atol=1e-9)
    rate = np.diff(b.U.values) ** 2 / np.diff(b.U.times)
    assert abs(rate.mean() - 1.0) < 0.1


def test_quadratic_variation_tracks_the_clock():
    qv, eta = [], []
    for k in range(20):
        d = bundle_diagnostics(build_pair(SeedSpec(2, k), G, 12.0))
        qv.append(d["qv_U_end"])
        eta.append(d["eta_end"])
    qv, eta = np.array(qv), np.array(eta)
    assert abs(qv.sum() / eta.sum() - 1.0) < 0.1


def test_non_domination_signature():
    grid = GridSpec(1.0, 2**17)
    big = [bundle_diagnostics(build_pair(SeedSpec(3, k), grid, 12.0))["max_qv_ratio"] > 10
           for k in range(30)]
    assert np.mean(big) >= 0.9


def test_pair_is_deterministic_and_independent_of_mesh_view():
    a = build_pair(SeedSpec(4, 1), G, 12.0)
    b = build_pair(SeedSpec(4, 1), G, 12.0)
    np.testing.assert_array_equal(a.U.values, b.U.values)
    c = coarsen_bundle(a, 4)
    np.testing.assert_array_equal(c.U.values, a.U.values[::4])
    np.testing.assert_array_equal(c.W.values, a.W.values[::4])


def test_horizon_failure():
    with pytest.raises(HorizonError):
        build_pair(SeedSpec(5), GridSpec(1e6, 16), 12.0, max_chunks=1, chunk=1.0)


def test_zero_interpolant_examples():
    W = brownian(SeedSpec(6), G)
    np.testing.assert_array_equal(zero_interpolant(flat(), W).values, -W.values)
    t = np.linspace(0, 1, 5)
    U = SamplePath(t, [0.0, 1.0, 2.0, 1.0, 0.0])
    W = SamplePath(t, [0.0, 5.0, -3.0, 7.0, 2.0])
    K = zero_interpolant(U, W)
    assert K(0.5) == -1.0
    np.testing.assert_allclose(K.values, -2.0 * t)
    with pytest.raises(ValueError):
        zero_interpolant(SamplePath(t, np.ones(5)), W)


def test_census_examples():
    W = brownian(SeedSpec(7), G)
    c = cone_census(zero_interpolant(flat(), W), W, flat())
    assert c.total_excursions == 0 and c.violating_count == 0
    t = np.linspace(0, 1, 5)
    U = SamplePath(t, [0.0, 1.0, 1.0, 1.0, 0.0])
    W = SamplePath(t, [0.0, 2.0, -1.0, 3.0, 0.0])
    K = W.with_values(-W.values)
    c = cone_census(K, W, U)
    assert c.total_excursions == 1 and c.violating_count == 0
    # a chord far from -W inside the excursion violates
    c = cone_census(zero_interpolant(U, W), W, U)
    assert c.violating_count == 1 and c.max_overshoot == 2.0
    assert c.violating_intervals.intervals == [(0.0, 1.0)]


def test_envelope_examples():
    W = brownian(SeedSpec(8), G)
    np.testing.assert_array_equal(envelope_process(flat(), W).values, -W.values)
    U = brownian(SeedSpec(9), G)
    assert np.all(envelope_process(U, flat()).values == 0)


def test_envelope_respects_the_cone():
    b = build_bundle(SeedSpec(10), G, 12.0)
    gap = np.abs(b.L.values + b.W.values) - np.abs(b.U.values)
    assert gap.max() <= 1e-12
    assert np.all(np.diff(b.Vbar.values) >= 0) and b.Vbar.values[0] == 0
    assert cone_overshoot(b.U, b.W, b.L) >= 0


def test_zero_bundle_has_zero_residuals():
    z = flat()
    eta = LocalTimeCurve(G.times(), G.times())
    b = complete_bundle(CounterexampleBundle(12.0, SeedSpec(0), z, z, z, z, eta))
    r = verify_identities(b)
    assert r.local_time_identity == 0 and r.cone_overshoot == 0 and r.zero_set_residual == 0


def test_assembly_properties():
    b = build_bundle(SeedSpec(11), G, 12.0)
    out, pair = assemble_pair(b)
    assert np.all(pair.alpha + pair.beta == pair.times)
    r = verify_identities(out, pair)
    assert r.alpha_flat_share == 0.0
    assert 0.0 <= r.frozen_u_residual <= 1.0 and 0.0 <= r.balayage_share <= 1.0
    assert out.V is not None and out.Sbar is not None
    np.testing.assert_allclose(out.V.values, out.Y.values + pair.W.values)


def test_assembly_with_frozen_brownian_driver():
    b = build_bundle(SeedSpec(12), G, 12.0)
    _, pair = assemble_pair(b, Bbar=flat())
    assert np.all(pair.alpha == 0)
    assert np.all(pair.U.values == b.U.values[0]) and np.all(pair.V.values == 0)


def test_dump_bundle(tmp_path):
    b = build_bundle(SeedSpec(13), GridSpec(1.0, 256), 12.0)
    written = dump_bundle(b, tmp_path, verify_identities(b))
    names = {p.split("/")[-1] for p in written}
    assert {"U.csv", "W.csv", "L.csv", "K.csv", "manifest.json"} <= names
