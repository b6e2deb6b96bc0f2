import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tanakalab.errors import ClockError, EnvelopeError, GridMismatchError
from tanakalab.harness.experiments import random_alternative, random_clock, random_envelope
from tanakalab.pathkit import SamplePath
from tanakalab.reflection import (
    ConeEnvelope,
    MonotoneClock,
    backtrack_index,
    clock_breakpoints,
    minimality_witness,
    reflection_map,
    reflection_map_naive,
    running_envelope,
    split_time,
    synchronization_residual,
    synchronize_clocks,
    total_variation,
)


def cone(n=301, t_end=3.0):
    t = np.linspace(0, t_end, n)
    return ConeEnvelope.from_arrays(t, -t, t)


def bent(n=3001):
    # f = -x on [0, 3]; g = x on [0, 1] and 2 - x on [1, 3]
    t = np.linspace(0, 3, n)
    return ConeEnvelope.from_arrays(t, -t, np.where(t <= 1, t, 2 - t))


def test_envelope_validation():
    with pytest.raises(EnvelopeError):
        ConeEnvelope.from_arrays([0.0, 1.0], [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(EnvelopeError):
        ConeEnvelope.from_arrays([0.0, 1.0], [0.0, 1.0], [0.0, 0.0])
    with pytest.raises(GridMismatchError):
        ConeEnvelope(SamplePath([0.0, 1.0], [0.0, 0.0]), SamplePath([0.0, 2.0], [0.0, 1.0]))


def test_running_envelope():
    zero = SamplePath([0.0, 1.0], [0.0, 0.0])
    assert running_envelope(zero, zero, 0.2, 0.7) == (0.0, 0.0)
    env = cone()
    assert running_envelope(env.lower, env.upper, 1.0, 3.0) == (-1.0, 1.0)
    F, G = running_envelope(env.lower, env.upper, 1.5, 1.5)
    assert (F, G) == (-1.5, 1.5)


def test_backtrack_index():
    env = cone()
    assert backtrack_index(env, 0.0) == 0.0
    assert backtrack_index(env, 2.3) == 0.0
    assert abs(backtrack_index(bent(), 3.0) - 1.0) < 1e-12


def test_reflection_examples():
    t = np.linspace(0, 1, 11)
    f = np.sin(5 * t)
    np.testing.assert_array_equal(reflection_map(ConeEnvelope.from_arrays(t, f, f)).values, f)
    assert np.all(reflection_map(cone()).values == 0)
    env = bent()
    h = reflection_map(env)
    assert abs(h(2.0)) < 1e-12 and abs(h(3.0) + 1.0) < 1e-12
    np.testing.assert_allclose(reflection_map_naive(env).values, h.values, atol=1e-12)
    assert abs(total_variation(h) - 1.0) <= env.lower.mesh


def test_total_variation():
    assert total_variation(np.linspace(0, 5, 7)) == 5.0
    assert total_variation([0.0, 1.0, 0.0, 1.0]) == 3.0


def test_minimality_examples():
    env = cone()
    tv_l, tv_alt = minimality_witness(env, reflection_map(env))
    assert tv_l == tv_alt
    tv_l, tv_alt = minimality_witness(env, SamplePath(env.times, env.times / 2))
    assert tv_l == 0 and tv_alt == 1.5
    with pytest.raises(EnvelopeError):
        minimality_witness(env, SamplePath(env.times, 2 * env.times))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fast_reflection_matches_backward_scan(seed):
    gen = np.random.default_rng(seed)
    env = random_envelope(gen, 400)
    h = reflection_map(env).values
    np.testing.assert_allclose(h, reflection_map_naive(env).values, atol=1e-12, rtol=0)
    assert np.all(env.lower.values <= h) and np.all(h <= env.upper.values)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reflection_is_minimal(seed):
    gen = np.random.default_rng(seed)
    env = random_envelope(gen, 300)
    for _ in range(10):
        tv_l, tv_alt = minimality_witness(env, random_alternative(gen, env))
        assert tv_l <= tv_alt + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 4.0))
def test_reflection_is_scale_equivariant(seed, c):
    env = random_envelope(np.random.default_rng(seed), 200)
    h = reflection_map(env).values
    scaled = ConeEnvelope.from_arrays(env.times, c * env.lower.values, c * env.upper.values)
    assert np.all(np.abs(reflection_map(scaled).values - c * h) <= 1e-12 * c * (1 + np.abs(h)))


def test_reflection_only_moves_when_pushed():
    env = random_envelope(np.random.default_rng(5), 2000)
    h = reflection_map(env).values
    f, g = env.lower.values, env.upper.values
    dh = np.diff(h)
    assert np.all((dh >= 0) | (h[1:] == g[1:]))
    assert np.all((dh <= 0) | (h[1:] == f[1:]))


def test_clock_examples():
    t = np.linspace(0, 2, 21)
    V = MonotoneClock(t, t)
    S = MonotoneClock(t, t)
    assert synchronize_clocks(V, S, 2.0) == (1.0, 1.0)
    V2 = MonotoneClock(t, 2 * t)
    a, b = synchronize_clocks(V2, S, 3.0)
    assert abs(a - 1.0) < 1e-12 and abs(b - 2.0) < 1e-12 and a + b == 3.0
    zero = MonotoneClock(t, np.zeros_like(t))
    a, b = synchronize_clocks(V, zero, 1.5)
    assert (a, b) == (0.0, 1.5)


def test_clock_validation():
    with pytest.raises(ClockError):
        MonotoneClock([0.0, 1.0], [1.0, 0.0])
    t = np.linspace(0, 1, 5)
    with pytest.raises(ClockError):
        synchronize_clocks(MonotoneClock(t, t), MonotoneClock(t, t), 5.0)
    with pytest.raises(ClockError):
        clock_breakpoints(MonotoneClock(t, t + 1), MonotoneClock(t, t))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interlacing_is_exact(seed):
    gen = np.random.default_rng(seed)
    V, S = random_clock(gen, 300), random_clock(gen, 300)
    T, _ = clock_breakpoints(V, S)
    t = np.concatenate((gen.uniform(0, T[-1], 100), T))
    a, b = synchronize_clocks(V, S, t)
    assert np.all(a + b == t)
    # nondecreasing up to the ulp moves that make the split exact
    srt = a[np.argsort(t, kind="stable")]
    assert np.all(np.diff(srt) >= -4 * np.spacing(srt[1:]))
    resid, tol = synchronization_residual(V, S, np.minimum(a, V.t_end), np.minimum(b, S.t_end))
    assert np.all(resid <= tol)


@given(st.floats(0, 1e6), st.floats(0, 1))
def test_split_time_is_exact(t, frac):
    a, b = split_time(t, t * frac)
    assert a + b == t and 0 <= a <= t and b >= 0
