import math

import numpy as np
import pytest

from tanakalab.errors import HorizonError
from tanakalab.pathkit import SamplePath, quadratic_variation
from tanakalab.stochgen import (
    GridSpec,
    SeedSpec,
    bridge_refine,
    brownian,
    brownian_at,
    brownian_bridge,
    brownian_excursion,
    clock_integral,
    dds_transform,
    invert_clock,
    power_time_change,
)

N = 10_000


def within(sample, target, k=3.0):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - target) <= k * se


def test_seed_determinism_and_independence():
    g = GridSpec(1.0, 64)
    a = brownian(SeedSpec(5, 2), g)
    b = brownian(SeedSpec(5, 2), g)
    c = brownian(SeedSpec(5, 3), g)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert not np.array_equal(brownian(SeedSpec(5, 2), g, 1).values, a.values)


def test_seed_and_grid_validation():
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        GridSpec(0.0, 10)
    with pytest.raises(ValueError):
        GridSpec(1.0, 12).coarsen(5)


def test_dyadic_subgrid_is_bit_identical():
    fine = GridSpec(1.0, 2**12).times()
    np.testing.assert_array_equal(fine[::8], GridSpec(1.0, 2**9).times())


def test_brownian_moments():
    g = GridSpec(1.0, 4)
    paths = np.array([brownian(SeedSpec(1, k), g).values for k in range(N)])
    assert np.all(paths[:, 0] == 0)
    end = paths[:, -1]
    # variance of B(1): sample of squares has mean 1
    assert within(end**2, 1.0)
    inc = np.diff(paths, axis=1)
    assert within(inc[:, 0] * inc[:, 2], 0.0)
    assert within(inc[:, 1] * inc[:, 3], 0.0)


def test_bridge_moments_and_decomposition():
    g = GridSpec(1.0, 8)
    br = np.array([brownian_bridge(SeedSpec(2, k), g).values for k in range(N)])
    assert np.all(br[:, 0] == 0) and np.all(br[:, -1] == 0)
    assert within(br[:, 4] ** 2, 0.25)
    # bridge + t Z has the marginal of B: variance t at t = 1/2
    z = np.random.default_rng(0).standard_normal(N)
    assert within((br[:, 4] + 0.5 * z) ** 2, 0.5)


def test_excursion():
    g = GridSpec(1.0, 64)
    ex = np.array([brownian_excursion(SeedSpec(3, k), g).values for k in range(N)])
    assert np.all(ex[:, 0] == 0) and np.all(ex[:, -1] == 0)
    assert np.all(ex >= 0)
    # E(1/2) = (1/2) chi_3, E chi_3 = 2 sqrt(2/pi)
    chi = np.linalg.norm(np.random.default_rng(1).standard_normal((N, 3)), axis=1)
    assert within(ex[:, 32], 0.5 * 2 * math.sqrt(2 / math.pi))
    assert abs(ex[:, 32].mean() - 0.5 * chi.mean()) < 0.03


def test_bridge_requires_unit_grid():
    with pytest.raises(ValueError):
        brownian_bridge(SeedSpec(1), GridSpec(2.0, 8))


def test_power_time_change_examples():
    t = np.linspace(0, 1, 1001)
    b = brownian(SeedSpec(4), GridSpec(1.0, 1000))
    U, eta = power_time_change(b, 0.0, GridSpec(1.0, 1000))
    np.testing.assert_allclose(eta.values, t, atol=1e-12)
    np.testing.assert_allclose(U.values, b.values, atol=1e-12)

    const = SamplePath(np.linspace(0, 1, 101), np.full(101, 2.0))
    U, eta = power_time_change(const, 1.0, GridSpec(2.0, 100))
    np.testing.assert_allclose(eta.values, np.linspace(0, 2, 101) / 2, atol=1e-12)
    assert np.all(U.values == 2.0)

    s = np.linspace(0, 2, 200_001)
    U, eta = power_time_change(SamplePath(s, s), 2.0, GridSpec(2.0, 20))
    tt = np.linspace(0, 2, 21)
    np.testing.assert_allclose(eta.values, np.cbrt(3 * tt), atol=1e-6)


def test_clock_inversion():
    times = np.array([0.0, 1.0, 2.0, 3.0])
    clock = np.array([0.0, 1.0, 1.0, 3.0])
    out = invert_clock(times, clock, np.array([0.0, 0.5, 1.0, 2.0, 3.0]))
    # a plateau is skipped: inf{s : clock(s) > 1} = 2
    np.testing.assert_allclose(out, [0.0, 0.5, 2.0, 2.5, 3.0])
    with pytest.raises(HorizonError):
        invert_clock(times, clock, np.array([4.0]))


def test_clock_integral():
    b = brownian(SeedSpec(8), GridSpec(4.0, 2**10))
    assert clock_integral(b, 0.0).values[-1] == pytest.approx(4.0)
    line = SamplePath(np.linspace(0, 1, 1001), np.linspace(0, 1, 1001))
    assert clock_integral(line, 2.0).values[-1] == pytest.approx(1 / 3, rel=1e-6)


def test_bridge_refine_keeps_nodes_and_variance():
    b = brownian(SeedSpec(9), GridSpec(1.0, 4))
    r = bridge_refine(b, np.array([1, 3]), np.array([4, 2]), np.random.default_rng(0))
    assert len(r) == 5 + 3 + 1
    for t, v in zip(b.times, b.values):
        assert r(t) == v
    # conditional variance at a cell midpoint is h/4 with h the cell length
    vals = []
    for k in range(4000):
        r = bridge_refine(SamplePath([0.0, 1.0], [0.0, 0.0]), np.array([0]), np.array([2]),
                          np.random.default_rng(k))
        vals.append(r.values[1])
    assert within(np.array(vals) ** 2, 0.25)


def test_dds_transform():
    with pytest.raises(HorizonError):
        dds_transform(SamplePath([0.0, 1.0, 2.0], [1.0, 1.0, 1.0]))
    ends = []
    for k in range(2000):
        m = brownian(SeedSpec(10, k), GridSpec(1.0, 2000))
        m = m.with_values(2 * m.values)
        beta = dds_transform(m, 200, horizon=1.0)
        ends.append(beta.values[-1])
    assert within(np.array(ends) ** 2, 1.0)


def test_brownian_at_nonuniform():
    t = np.array([0.0, 0.1, 0.5, 2.0])
    b = brownian_at(SeedSpec(1), t)
    assert b.values[0] == 0 and np.array_equal(b.times, t)
    with pytest.raises(ValueError):
        brownian_at(SeedSpec(1), np.array([0.5, 1.0]))
