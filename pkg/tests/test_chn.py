import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epvae.chn import (ChnParams, ChnState, NumericalDivergenceError, SettleConfig,
                       build_topology, energy, energy_grad, init_params, initial_state, rho,
                       rho_prime, settle, step)

from conftest import random_net, zero_params

# mpmath at 30 digits
RHO_1 = 0.952574126822433219121151848228
ENERGY_2NEURON = 0.469239941445506335173397142317


def test_rho_fixed_points():
    assert rho(0.0) == 0.5
    assert rho_prime(0.0) == 0.75
    assert rho(1.0) == pytest.approx(RHO_1, abs=1e-12)
    assert rho(1.0) == pytest.approx(1.0 / (1.0 + math.exp(-3.0)), abs=1e-15)


@given(st.floats(-30, 30))
def test_rho_bounds_and_symmetric_derivative(x):
    assert 0.0 <= rho(x) <= 1.0
    assert rho_prime(x) == pytest.approx(rho_prime(-x), abs=1e-15)


def test_rho_prime_matches_finite_difference():
    x = np.linspace(-3, 3, 61)
    h = 1e-6
    np.testing.assert_allclose(rho_prime(x), (rho(x + h) - rho(x - h)) / (2 * h), atol=1e-9)


@pytest.mark.parametrize("kind, expected", [("layered", 18), ("dense", 30)])
def test_topology_pair_counts(kind, expected):
    mask = build_topology(kind, 2, 3, 1)
    assert mask.n_pairs == expected
    assert not mask.allowed.diagonal().any()
    assert np.array_equal(mask.allowed, mask.allowed.T)
    parts = np.concatenate([mask.input_idx, mask.hidden_idx, mask.output_idx])
    assert np.array_equal(np.sort(parts), np.arange(mask.n_total))


def test_layered_has_no_skip_connections():
    mask = build_topology("layered", 2, 3, 1)
    assert not mask.allowed[mask.input_idx[0], mask.output_idx[0]]
    assert not mask.allowed[np.ix_(mask.hidden_idx, mask.hidden_idx)].any()


@pytest.mark.parametrize("sizes", [(0, 3, 1), (2, 0, 1), (2, 3, 0)])
def test_topology_rejects_empty_partition(sizes):
    with pytest.raises(ValueError):
        build_topology("dense", *sizes)


def test_init_is_symmetric_masked_and_deterministic():
    mask = build_topology("layered", 4, 5, 3)
    a, b = init_params(mask, 3), init_params(mask, 3)
    assert np.array_equal(a.W, b.W)
    assert np.array_equal(a.W, a.W.T)
    assert np.all(a.W[~mask.allowed] == 0.0)
    assert not np.array_equal(a.W, init_params(mask, 4).W)


def test_init_matches_reference_draw():
    mask = build_topology("dense", 2, 2, 2)
    params = init_params(mask, 42)
    # every neuron has degree 5 in a 6-neuron dense net
    assert np.all(np.abs(params.W) <= math.sqrt(6 / 10))

    rng = np.random.default_rng(42)
    draws = rng.uniform(-1.0, 1.0, size=15)
    W = np.zeros((6, 6))
    k = 0
    for i in range(6):
        for j in range(i + 1, 6):
            W[i, j] = W[j, i] = draws[k] * math.sqrt(6 / (5 + 5))
            k += 1
    np.testing.assert_array_equal(params.W, W)


def test_params_reject_asymmetric_or_offmask():
    mask = build_topology("layered", 1, 1, 1)
    W = np.zeros((3, 3))
    W[0, 1] = 0.1
    with pytest.raises(ValueError):
        ChnParams(mask, W)
    W = np.zeros((3, 3))
    W[0, 2] = W[2, 0] = 0.1  # input-output is not allowed when layered
    with pytest.raises(ValueError):
        ChnParams(mask, W)


def test_energy_closed_forms():
    mask = build_topology("dense", 1, 1, 1)
    s = np.array([0.3, -0.7, 1.1])
    assert energy(zero_params(mask), ChnState(s)) == pytest.approx(0.5 * s @ s, abs=1e-15)
    p = random_net(9, 0)
    assert energy(p, ChnState(np.zeros(9))) == pytest.approx(-p.W.sum() / 8, abs=1e-15)


def test_energy_two_neuron_golden():
    mask = build_topology("dense", 1, 1, 1)
    W = np.zeros((3, 3))
    W[0, 1] = W[1, 0] = 0.2
    # the third neuron sits at s = 0 with no weights, adding nothing
    assert energy(ChnParams(mask, W), ChnState([1.0, 0.5, 0.0])) == pytest.approx(
        ENERGY_2NEURON, abs=1e-12)


def test_energy_dimension_mismatch():
    with pytest.raises(ValueError):
        energy(random_net(6, 0), ChnState(np.zeros(5)))
    with pytest.raises(ValueError):
        energy_grad(random_net(6, 0), ChnState(np.zeros(7)))


def test_energy_grad_zero_weights_is_state():
    mask = build_topology("dense", 2, 2, 2)
    s = np.linspace(-1, 1, 6)
    np.testing.assert_array_equal(energy_grad(zero_params(mask), ChnState(s)), s)


def test_energy_grad_matches_central_differences():
    h = 1e-5
    rng = np.random.default_rng(0)
    for trial in range(50):
        n = int(rng.integers(3, 20))
        p = random_net(n, trial, kind=["dense", "layered"][trial % 2])
        s = rng.uniform(-1.5, 1.5, n)
        g = energy_grad(p, ChnState(s))
        fd = np.array([(energy(p, ChnState(s + h * e)) - energy(p, ChnState(s - h * e))) / (2 * h)
                       for e in np.eye(n)])
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)


def test_step_preserves_fixed_point_and_clamps():
    mask = build_topology("dense", 2, 2, 2)
    state = ChnState(np.zeros(6))
    out = step(zero_params(mask), state, SettleConfig())
    np.testing.assert_array_equal(out.s, state.s)

    state = ChnState(np.array([0.4, -0.2, 0.3, 0.9, -0.5, 0.1]), clamped=[0, 1])
    out = step(zero_params(mask), state, SettleConfig(dt=1.0))
    np.testing.assert_array_equal(out.s, [0.4, -0.2, 0, 0, 0, 0])


def test_step_descends_energy():
    p = random_net(8, 11)
    state = ChnState(np.random.default_rng(1).uniform(-1, 1, 8), clamped=[0, 1])
    after = step(p, state, SettleConfig(dt=0.05))
    assert energy(p, after) <= energy(p, state) + 1e-12


@settings(max_examples=120, deadline=None)
@given(n=st.integers(3, 32), seed=st.integers(0, 2**31 - 1),
       kind=st.sampled_from(["dense", "layered"]))
def test_energy_never_increases_along_settling(n, seed, kind):
    p = random_net(n, seed, kind)
    rng = np.random.default_rng(seed)
    state = initial_state(n, p.mask.input_idx, rng.uniform(-1, 1, p.mask.n_in))
    state.s[state.free] = rng.uniform(-2, 2, state.free.sum())
    cfg = SettleConfig(dt=0.05)
    e = energy(p, state)
    for _ in range(60):
        nxt = step(p, state, cfg)
        e_next = energy(p, nxt)
        assert e_next <= e + 1e-12
        np.testing.assert_array_equal(nxt.s[state.clamped], state.s[state.clamped])
        state, e = nxt, e_next


def test_settle_at_fixed_point_converges_immediately():
    mask = build_topology("dense", 2, 2, 2)
    out, iters, ok = settle(zero_params(mask), ChnState(np.zeros(6)), SettleConfig())
    assert ok and iters == 1


def test_settle_zero_weights_decays_geometrically():
    mask = build_topology("dense", 1, 2, 2)
    s0 = np.array([0.7, 1.0, -0.5, 0.25, 2.0])
    out, iters, ok = settle(zero_params(mask), ChnState(s0, [0]),
                            SettleConfig(dt=0.1, max_iters=10_000, tol=1e-8))
    assert ok
    np.testing.assert_allclose(out.s[1:], s0[1:] * 0.9 ** iters, rtol=1e-9)
    assert out.s[0] == 0.7


def test_settle_reaches_stationary_point():
    p = random_net(16, 5)
    state = initial_state(16, p.mask.input_idx, np.linspace(-1, 1, p.mask.n_in))
    cfg = SettleConfig(dt=0.05, max_iters=20_000, tol=1e-6)
    out, _, ok = settle(p, state, cfg)
    assert ok
    g = energy_grad(p, out)[out.free]
    assert np.max(np.abs(g)) <= 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_settle_stationarity_bound(seed):
    # convergence is judged on the step size dt*|grad|, so the residual gradient
    # is bounded by tol/dt, which is within 10*tol once dt >= 0.1
    p = random_net(20, seed)
    state = initial_state(20, p.mask.input_idx, np.linspace(-1, 1, p.mask.n_in))
    for dt in (0.05, 0.1, 0.5):
        cfg = SettleConfig(dt=dt, max_iters=50_000, tol=1e-7)
        out, _, ok = settle(p, state, cfg)
        assert ok
        g = np.max(np.abs(energy_grad(p, out)[out.free]))
        assert g <= cfg.tol / dt
        if dt >= 0.1:
            assert g <= 10 * cfg.tol


def test_settle_batched_rows_match_single_rows():
    p = random_net(12, 2)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (3, p.mask.n_in))
    cfg = SettleConfig(dt=0.1, max_iters=5000, tol=1e-12)
    batch, _, _ = settle(p, initial_state(12, p.mask.input_idx, x), cfg)
    for i in range(3):
        one, _, _ = settle(p, initial_state(12, p.mask.input_idx, x[i]), cfg)
        np.testing.assert_allclose(batch.s[i], one.s, atol=1e-10)


def test_settle_reports_divergence():
    mask = build_topology("dense", 1, 1, 1)
    with pytest.raises(NumericalDivergenceError) as err:
        settle(zero_params(mask), ChnState([0.0, np.nan, 0.0], [0]), SettleConfig())
    assert err.value.iteration == 1


def test_settle_config_validation():
    with pytest.raises(ValueError):
        SettleConfig(dt=0.0)
    with pytest.raises(ValueError):
        SettleConfig(dt=1.5)
    with pytest.raises(ValueError):
        SettleConfig(max_iters=0)
