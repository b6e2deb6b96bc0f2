import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tanakalab.errors import GridMismatchError
from tanakalab.pathkit import SamplePath
from tanakalab.sde import SdeSpec, convergence_study, euler_solve, euler_solve_general, mirror_coupling
from tanakalab.stochgen import GridSpec, SeedSpec, brownian

G = GridSpec(1.0, 256)


def noise(k=0, grid=G):
    sd = SeedSpec(21, k)
    return brownian(sd, grid, 1), brownian(sd, grid, 2)


def test_zero_noise_keeps_initial_value():
    z = SamplePath(G.times(), np.zeros(G.n_steps + 1))
    assert np.all(euler_solve(SdeSpec(1.0, 3.0), z, z).values == 3.0)


def test_far_from_zero_is_plain_sum():
    b1, b2 = noise(grid=GridSpec(0.01, 100))
    x = euler_solve(SdeSpec(2.0, 10.0), b1, b2)
    np.testing.assert_allclose(x.values, 10.0 + b1.values + 2.0 * b2.values, atol=1e-12)


def test_hand_steps():
    t = [0.0, 1.0]
    x = euler_solve(SdeSpec(2.0, 0.0, "minus"), SamplePath(t, [0.0, 0.3]), SamplePath(t, [0.0, 0.1]))
    assert x.values[1] == pytest.approx(-0.1)
    # two steps: x1 = 0 - 0.5 + 0.2 = -0.3; x2 = -0.3 - (-0.4) + 0.1 = 0.2
    t = [0.0, 1.0, 2.0]
    x = euler_solve_general(SamplePath(t, [0.0, 0.5, 0.1]), SamplePath(t, [0.0, 0.2, 0.3]), 0.0)
    np.testing.assert_allclose(x.values, [0.0, -0.3, 0.2])


def test_general_specializations():
    b1, b2 = noise()
    z = b1.with_values(np.zeros(len(b1)))
    np.testing.assert_array_equal(euler_solve_general(b1, z, 0.0).values,
                                  euler_solve(SdeSpec(0.0), b1, b2).values)
    np.testing.assert_allclose(euler_solve_general(z, b2, 1.5).values, 1.5 + b2.values, atol=1e-12)
    lam = 0.7
    np.testing.assert_array_equal(euler_solve_general(b1, b2.with_values(lam * b2.values), 0.2).values,
                                  euler_solve(SdeSpec(lam, 0.2), b1, b2).values)


def test_grid_mismatch():
    b1, _ = noise()
    with pytest.raises(GridMismatchError):
        euler_solve(SdeSpec(1.0), b1, brownian(SeedSpec(1), GridSpec(1.0, 128)))


def test_spec_validation():
    with pytest.raises(ValueError):
        SdeSpec(1.0, zero_convention="zero")
    assert SdeSpec(1.0).mirrored().zero_convention == "plus"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_scale_equivariance(k, c):
    b1, b2 = noise(k)
    x = euler_solve(SdeSpec(0.8, 0.3), b1, b2).values
    y = euler_solve(SdeSpec(0.8, 0.3 * c), b1.with_values(c * b1.values), b2.with_values(c * b2.values)).values
    assert np.all(np.abs(y - c * x) <= 1e-9 * c * (1 + np.abs(x)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_mirror_identity_without_perturbation(k):
    b1, b2 = noise(k)
    xm = euler_solve(SdeSpec(0.0, 0.0, "minus"), b1, b2).values
    xp = euler_solve(SdeSpec(0.0, 0.0, "plus"), b1, b2).values
    np.testing.assert_array_equal(xp, -xm)
    res = mirror_coupling(SdeSpec(0.0), b1, b2)
    assert res.sup_distance == 2 * np.abs(xm).max()
    assert 0 <= res.end_distance <= res.sup_distance


def test_coupling_far_from_zero_is_exact():
    b1, b2 = noise(grid=GridSpec(0.01, 100))
    assert mirror_coupling(SdeSpec(1.0, 10.0), b1, b2).sup_distance == 0


def test_convergence_study_degenerate_and_contrast():
    rep = convergence_study([0.0, 1.0], [2.0**-6, 2.0**-7], 3, 5, noise_scale=0.0)
    assert all(row[4] == 0 and row[5] == 0 for row in rep.tables["coupling"][1])
    rep = convergence_study([0.0, 1.0], [2.0**-6, 2.0**-7, 2.0**-8], 40, 5)
    cols, rows = rep.tables["coupling"]
    assert cols == ["lambda", "mesh", "replica", "seed", "sup_distance", "end_distance"]
    assert len(rows) == 40 * 2 * 3
    m0 = rep.summary["median_sup_distance"]["0.0"]
    assert min(m0) > 0.5 and max(m0) < 2 * m0[0]
    with pytest.raises(ValueError):
        convergence_study([1.0], [2.0**-7, 2.0**-6], 1, 0)
