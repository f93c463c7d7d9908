from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sselab import noise
from sselab.errors import InvalidParameter


def test_replay_is_bit_identical():
    a = noise.NoiseStream(42, 0)
    b = noise.NoiseStream(42, 0)
    pair = (noise.standard_normal(a), noise.standard_normal(a))
    assert pair == (noise.standard_normal(b), noise.standard_normal(b))
    assert pair[0] != pair[1]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=8), st.integers(0, 2**64 - 1))
def test_chunking_does_not_change_sequence(chunks, seed):
    total = sum(chunks)
    ref = noise.NoiseStream(seed, 3).normals(total)
    s = noise.NoiseStream(seed, 3)
    got = np.concatenate([s.normals(c) for c in chunks])
    np.testing.assert_array_equal(got, ref)


def test_seed_validation():
    with pytest.raises(InvalidParameter):
        noise.NoiseStream(-1, 0)
    with pytest.raises(InvalidParameter):
        noise.NoiseStream(2**64, 0)
    with pytest.raises(InvalidParameter):
        noise.NoiseStream(1, -1)
    noise.NoiseStream(2**64 - 1, 0)


def test_normal_moments():
    z = noise.NoiseStream(7, 0).normals(1_000_000)
    assert abs(z.mean()) < 4 / math.sqrt(1e6)
    assert abs(z.var() - 1.0) < 0.01


def test_substreams_uncorrelated():
    a = noise.NoiseStream(11, 0).normals(100_000)
    b = noise.NoiseStream(11, 1).normals(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 4 / math.sqrt(1e5)


def test_different_master_seeds_differ():
    assert noise.NoiseStream(1, 0).standard_normal() != noise.NoiseStream(2, 0).standard_normal()


def test_wiener_examples():
    s = noise.NoiseStream(5, 0)
    assert noise.wiener_increments(s, 0, 0.01).values.size == 0
    inc = noise.wiener_increments(s, 100_000, 0.01)
    assert inc.values.var() == pytest.approx(0.01, rel=0.05)
    with pytest.raises(InvalidParameter):
        noise.wiener_increments(s, 10, 0.0)


def test_wiener_increments_scale_normals():
    z = noise.NoiseStream(9, 4).normals(50)
    inc = noise.wiener_increments(noise.NoiseStream(9, 4), 50, 0.25)
    np.testing.assert_array_equal(inc.values, z * 0.5)
    path = inc.path()
    assert path[0] == 0.0 and path.size == 51


def test_wiener_covariance_is_min():
    dt, n = 0.01, 100
    paths = np.array([
        noise.wiener_increments(noise.NoiseStream(21, r), n, dt).path() for r in range(10_000)
    ])
    i, j = 30, 80
    t, s = i * dt, j * dt
    cov = np.mean(paths[:, i] * paths[:, j])
    assert cov == pytest.approx(min(t, s), rel=0.05)


def test_ou_init_examples():
    s = noise.NoiseStream(3, 0)
    z = noise.NoiseStream(3, 0).standard_normal()
    assert noise.ou_init(0.5, s).x == z
    with pytest.raises(InvalidParameter):
        noise.ou_init(0.0, s)
    with pytest.raises(InvalidParameter):
        noise.ou_init(-1.0, s)


def test_ou_init_variance():
    z = noise.NoiseStream(13, 0).normals(100_000)
    x = noise.ou_stationary_sample(2.0, z)
    assert x.var() == pytest.approx(0.25, rel=0.05)


def test_ou_step_examples():
    assert noise.ou_step(noise.OUState(1.0, 0.0), 0.01, 0.0).x == 0.0
    assert noise.ou_step(noise.OUState(1.0, 1.0), 0.01, 0.0).x == pytest.approx(0.99, abs=1e-15)
    with pytest.raises(InvalidParameter):
        noise.ou_step(noise.OUState(1.0, 1.0), 0.0, 0.0)


def _ou_chains(k, dt, n_steps, n_chains, seed):
    z = noise.normal_matrix(seed, range(n_chains), n_steps + 1)
    state = noise.OUState(k, noise.ou_stationary_sample(k, z[:, 0]))
    xs = np.empty((n_steps + 1, n_chains))
    xs[0] = state.x
    dW = z[:, 1:] * math.sqrt(dt)
    for n in range(n_steps):
        state = noise.ou_step(state, dt, dW[:, n])
        xs[n + 1] = state.x
    return xs


def test_ou_long_run_stationary_variance():
    # a single 10^6-step run spans only ~1000 correlation times (~4.5% spread);
    # 256 parallel chains bring the estimator spread to ~1%
    xs = _ou_chains(1.0, 1e-3, 62_500, 256, seed=17)
    assert xs[10_000:].var() == pytest.approx(0.5, rel=0.05)


def test_ou_autocorrelation():
    k, dt = 1.0, 0.01
    xs = _ou_chains(k, dt, 300, 20_000, seed=19)
    for tau in (0.1, 0.5, 1.0):
        lag = round(tau / dt)
        c = np.mean(xs[100] * xs[100 + lag])
        assert c == pytest.approx(math.exp(-k * tau) / (2 * k), rel=0.10)


def test_discrete_ito_isometry():
    dt, n = 0.01, 100
    F = np.sin(np.arange(n) * dt * 3.0) + 0.5
    dW = noise.normal_matrix(23, range(10_000), n) * math.sqrt(dt)
    integrals = dW @ F
    assert np.mean(integrals**2) == pytest.approx(np.sum(F**2) * dt, rel=0.05)
