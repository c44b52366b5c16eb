"""
CSGD — Test Suite.

Proves:
 Group 1 — Mini-batches
   1.  phi = 0 → every sampled error is zero
   2.  M = 1 → no other-AP blocks
   3.  Sampled other-AP estimates have variance (1-phi) rho within 2%

 Group 2 — SAA objective
   4.  M=1, phi=0 collapses to the exact sum-rate
   5.  Batch of one equals a direct sum_rate on the assembled realization
   6.  Duplicating every sample leaves the value unchanged

 Group 3 — SAA gradient
   7.  Analytic gradient matches central differences (step 1e-6 P), both readings
   8.  Scalar case |h|^2 / ((1 + p|h|^2) ln 2)
   9.  Entries below the power floor are rejected

 Group 4 — Projection
  10.  Feasible points are fixed; (P, P) → (P/2, P/2)
  11.  Agreement with an active-set KKT oracle within 1e-8
  12.  Idempotence and nearest-point property

 Group 5 — Iteration
  13.  alpha = 0 leaves p unchanged; exchanged reals grow by M K
  14.  One small step increases every AP's SAA on its batch
  15.  run_csgd output is feasible and the trace is deterministic
  16.  Normalized, constant and inv_sqrt steps have the documented sizes
  17.  The best exact sum-rate seen (start included) is returned
  18.  The stop rule is not checked before min_iter, for both monitors
  19.  At a converged point the projected-gradient residual vanishes
  20.  The SAA agrees with the conditional ergodic rate within 3 se
  21.  (slow) Gradient cost is linear in |B| and M, quadratic in K
  22.  (slow) CSGD beats equal power by >= 15% at M=K=4, phi=0.1, 20 dB
"""
import itertools
import math
import time

import numpy as np
import pytest

from core.csgd import (
    CsgdConfig,
    MiniBatch,
    csgd_step,
    init_state,
    project_feasible,
    run_csgd,
    saa_gradient,
    saa_sum_rate,
    sample_minibatch,
)
from core.netenv import (
    ChannelRealization,
    GeometryConfig,
    LongTermCsi,
    complex_gaussian,
    make_stream,
    sample_channel,
    sample_channels,
    sample_deployment,
)
from core.objective import batch_rates, check_feasible, sum_rate
from utils.errors import ConfigError


def _drop(M, K, rng):
    return sample_deployment(GeometryConfig(), M, K, rng)


# ────────────────────────────────────────────────────────────────
# Group 1 — Mini-batches
# ────────────────────────────────────────────────────────────────

def test_zero_phi_zero_errors(rng):
    batch = sample_minibatch(_drop(3, 2, rng), 0.0, 1, 8, rng)
    assert np.all(batch.e_i == 0)
    assert np.all(batch.e_others == 0)
    assert batch.h_hat_others.shape == (8, 2, 2)


def test_single_ap_has_no_others(rng):
    batch = sample_minibatch(_drop(1, 3, rng), 0.2, 0, 5, rng)
    assert batch.h_hat_others.shape == (5, 0, 3)
    assert batch.e_i.shape == (5, 3)
    assert batch.M == 1


def test_sampled_estimate_variance(rng):
    rho = LongTermCsi(np.array([[1.0, 2.0], [3.0, 0.5]]))
    batch = sample_minibatch(rho, 0.4, 0, 100_000, rng)
    var = np.mean(np.abs(batch.h_hat_others[:, 0, :]) ** 2, axis=0)
    np.testing.assert_allclose(var, 0.6 * rho.rho[1], rtol=0.02)


def test_bad_ap_index(rng):
    with pytest.raises(ConfigError):
        sample_minibatch(_drop(2, 2, rng), 0.1, 2, 4, rng)


# ────────────────────────────────────────────────────────────────
# Group 2 — SAA objective
# ────────────────────────────────────────────────────────────────

def test_saa_collapses_without_uncertainty(rng):
    rho = _drop(1, 3, rng)
    chan = sample_channel(rho, 0.0, rng)
    batch = sample_minibatch(rho, 0.0, 0, 4, rng)
    p = np.array([10.0, 20.0, 30.0])
    value = saa_sum_rate(chan.h_hat[0], batch, p, np.zeros((0, 3)))
    assert value == pytest.approx(sum_rate(chan, p[None, :]), rel=1e-12)


def test_single_sample_matches_direct_evaluation(rng):
    M, K, i = 3, 2, 1
    rho = _drop(M, K, rng)
    h_hat = sample_channel(rho, 0.3, rng).h_hat
    batch = sample_minibatch(rho, 0.3, i, 1, rng)
    p = rng.random((M, K)) * 20.0

    full_hat = np.insert(batch.h_hat_others[0], i, h_hat[i], axis=0)
    full_err = np.insert(batch.e_others[0], i, batch.e_i[0], axis=0)
    direct = sum_rate(ChannelRealization(full_hat, full_err, rho, 0.3), p)
    value = saa_sum_rate(h_hat[i], batch, p[i], np.delete(p, i, axis=0))
    assert value == pytest.approx(direct, rel=1e-12)


def test_duplicated_batch_same_value(rng):
    rho = _drop(3, 3, rng)
    h_hat = sample_channel(rho, 0.2, rng).h_hat
    batch = sample_minibatch(rho, 0.2, 2, 16, rng)
    p = np.full((3, 3), 5.0)
    a = saa_sum_rate(h_hat[2], batch, p[2], p[:2])
    b = saa_sum_rate(h_hat[2], batch.duplicated(), p[2], p[:2])
    assert b == pytest.approx(a, rel=1e-12)


# ────────────────────────────────────────────────────────────────
# Group 3 — SAA gradient
# ────────────────────────────────────────────────────────────────

def _fd_gradient(h_hat_i, batch, p_i, p_minus_i, step):
    fd = np.empty_like(p_i)
    for k in range(p_i.shape[0]):
        up, down = p_i.copy(), p_i.copy()
        up[k] += step
        down[k] -= step
        fd[k] = (saa_sum_rate(h_hat_i, batch, up, p_minus_i)
                 - saa_sum_rate(h_hat_i, batch, down, p_minus_i)) / (2 * step)
    return fd


@pytest.mark.parametrize("reading", ["local", "literal"])
def test_gradient_finite_differences(reading):
    P = 100.0
    rng = np.random.default_rng(2024)
    worst = 0.0
    cases = list(itertools.product([1, 2, 4, 8], [1, 2, 4], [0.0, 0.1, 0.5]))
    for M, K, phi in cases:
        rho = _drop(M, K, rng)
        h_hat = sample_channel(rho, phi, rng).h_hat
        i = int(rng.integers(M))
        batch = sample_minibatch(rho, phi, i, 8, rng, reading=reading)
        p = rng.uniform(0.2, 1.0, (M, K)) * P / K
        p_minus = np.delete(p, i, axis=0)
        grad = saa_gradient(h_hat[i], batch, p[i], p_minus, 1e-8 * P)
        fd = _fd_gradient(h_hat[i], batch, p[i], p_minus, 1e-6 * P)
        err = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, err)
    assert worst < 1e-5


def test_scalar_gradient(rng):
    h = np.array([0.6 + 0.8j])
    batch = MiniBatch(0, np.zeros((1, 1), complex), np.zeros((1, 0, 1), complex),
                      np.zeros((1, 0, 1), complex))
    p = np.array([3.0])
    grad = saa_gradient(h, batch, p, np.zeros((0, 1)), 1e-8)
    assert grad[0] == pytest.approx(1.0 / ((1.0 + 3.0) * math.log(2.0)), rel=1e-12)


def test_gradient_rejects_below_floor(rng):
    rho = _drop(2, 2, rng)
    batch = sample_minibatch(rho, 0.1, 0, 2, rng)
    with pytest.raises(ConfigError):
        saa_gradient(np.ones(2, complex), batch, np.array([0.0, 1.0]), np.ones((1, 2)), 1e-6)


# ────────────────────────────────────────────────────────────────
# Group 4 — Projection
# ────────────────────────────────────────────────────────────────

def _kkt_oracle(v, P):
    """Best candidate over every active set of the KKT conditions."""
    K = v.shape[0]
    candidates = []
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= P:
        candidates.append(clipped)
    for size in range(1, K + 1):
        for support in itertools.combinations(range(K), size):
            s = list(support)
            theta = (v[s].sum() - P) / size
            if theta < 0:
                continue
            x = np.zeros(K)
            x[s] = v[s] - theta
            outside = [k for k in range(K) if k not in support]
            if np.all(x[s] >= 0) and np.all(v[outside] <= theta + 1e-15):
                candidates.append(x)
    return min(candidates, key=lambda x: np.linalg.norm(x - v))


def test_projection_fixed_points():
    v = np.array([1.0, 2.0, 0.0])
    np.testing.assert_array_equal(project_feasible(v, 10.0), v)
    np.testing.assert_allclose(project_feasible(np.array([5.0, 5.0]), 5.0), [2.5, 2.5])


def test_projection_against_oracle(rng):
    P = 3.0
    for _ in range(1000):
        K = int(rng.integers(1, 5))
        v = rng.normal(0.0, 3.0, K)
        np.testing.assert_allclose(project_feasible(v, P), _kkt_oracle(v, P), atol=1e-8)


def test_projection_idempotent_and_nearest(rng):
    P = 2.0
    for _ in range(50):
        v = rng.normal(0.0, 2.0, 4)
        x = project_feasible(v, P)
        np.testing.assert_allclose(project_feasible(x, P), x, atol=1e-12)
        assert np.all(x >= 0) and x.sum() <= P + 1e-12
        others = rng.dirichlet(np.ones(5), size=200)[:, :4] * P * rng.random((200, 1))
        dist = np.linalg.norm(others - v, axis=1)
        assert np.all(np.linalg.norm(x - v) <= dist + 1e-12)


# ────────────────────────────────────────────────────────────────
# Group 5 — Iteration
# ────────────────────────────────────────────────────────────────

def test_zero_step_keeps_power(rng):
    rho = _drop(3, 2, rng)
    h_hat = sample_channel(rho, 0.1, rng).h_hat
    state = init_state(rho, h_hat, 0.1, 100.0, rng)
    before = state.p.copy()
    csgd_step(state, CsgdConfig(alpha=0.0, batch_size=4))
    np.testing.assert_array_equal(state.p, before)
    assert state.exchanged_per_ap == 3 * 2
    csgd_step(state, CsgdConfig(alpha=0.0, batch_size=4))
    assert state.exchanged_per_ap == 2 * 3 * 2


def test_small_step_ascends(rng):
    M, K, P = 3, 3, 100.0
    rho = _drop(M, K, rng)
    h_hat = sample_channel(rho, 0.1, rng).h_hat
    state = init_state(rho, h_hat, 0.1, P, rng)
    batches = [sample_minibatch(rho, 0.1, i, 32, rng) for i in range(M)]
    before = state.p.copy()
    csgd_step(state, CsgdConfig(alpha=1e-6 * P / K), batches=batches)
    for i in range(M):
        others = np.delete(before, i, axis=0)
        old = saa_sum_rate(h_hat[i], batches[i], before[i], others)
        new = saa_sum_rate(h_hat[i], batches[i], state.p[i], others)
        assert new >= old


def test_run_csgd_feasible_and_deterministic(rng):
    rho = _drop(3, 2, rng)
    chan = sample_channel(rho, 0.1, rng)
    config = CsgdConfig(L=30, batch_size=8)

    def run():
        return run_csgd(rho, chan.h_hat, 0.1, config, make_stream(5, "csgd"), 100.0, err=chan.err)

    a, b = run(), run()
    assert check_feasible(a.allocation, 100.0)[0]
    assert 1 <= a.iterations <= 30
    assert [r.exact_sum_rate for r in a.trace] == [r.exact_sum_rate for r in b.trace]
    np.testing.assert_array_equal(a.allocation, b.allocation)
    assert [r.exchanged_reals for r in a.trace] == [6 * (t + 1) for t in range(a.iterations)]


def test_step_schedules():
    grad = np.array([0.02, -0.05, 0.01])
    normalized = CsgdConfig()
    step = normalized.step(grad, 3, 100.0, 4)
    assert np.max(np.abs(step)) == pytest.approx(25.0 / 2.0)
    np.testing.assert_allclose(step / np.max(np.abs(step)), grad / 0.05)
    np.testing.assert_array_equal(normalized.step(np.zeros(3), 0, 100.0, 4), np.zeros(3))
    constant = CsgdConfig(step_schedule="constant")
    np.testing.assert_allclose(constant.step(grad, 7, 100.0, 4), 0.25 * grad)
    decaying = CsgdConfig(alpha=2.0, step_schedule="inv_sqrt")
    np.testing.assert_allclose(decaying.step(grad, 3, 100.0, 4), grad)
    with pytest.raises(ConfigError):
        CsgdConfig(monitor="sometimes")
    with pytest.raises(ConfigError):
        CsgdConfig(min_iter=-1)


def test_best_exact_allocation_is_returned(rng):
    rho = _drop(3, 3, rng)
    chan = sample_channel(rho, 0.1, rng)
    result = run_csgd(rho, chan.h_hat, 0.1, CsgdConfig(L=40, batch_size=8),
                      make_stream(6, "csgd"), 100.0, err=chan.err)
    start = sum_rate(chan, np.full((3, 3), 100.0 / 6))
    seen = [start] + [r.exact_sum_rate for r in result.trace]
    assert sum_rate(chan, result.allocation) == pytest.approx(max(seen), rel=1e-12)


@pytest.mark.parametrize("monitor", ["exact", "saa"])
def test_stop_rule_waits_for_min_iter(rng, monitor):
    rho = _drop(2, 2, rng)
    chan = sample_channel(rho, 0.1, rng)

    def run(min_iter):
        config = CsgdConfig(L=100, batch_size=4, tol=1e9, window=2, min_iter=min_iter,
                            monitor=monitor)
        return run_csgd(rho, chan.h_hat, 0.1, config, make_stream(7, "csgd"), 100.0, err=chan.err)

    settled = run(20)
    assert settled.converged and settled.iterations == 20
    assert run(0).iterations == 4


def test_stationary_point_residual_vanishes():
    P = 100.0
    rho = LongTermCsi(np.array([[1.0, 0.01]]))
    h_hat = np.array([[1.0 + 0.0j, 0.1 + 0.0j]])
    batch = MiniBatch(0, np.zeros((1, 2), complex), np.zeros((1, 0, 2), complex),
                      np.zeros((1, 0, 2), complex))
    config = CsgdConfig(alpha=1000.0, step_schedule="constant")
    state = init_state(rho, h_hat, 0.0, P, np.random.default_rng(0))
    for _ in range(50):
        csgd_step(state, config, batches=[batch])

    floor = config.resolved_floor(P)
    p = state.p[0]
    grad = saa_gradient(h_hat[0], batch, np.maximum(p, floor), np.zeros((0, 2)), floor)
    residual = project_feasible(p + grad, P) - p
    assert np.linalg.norm(residual) < 1e-6
    np.testing.assert_allclose(p, [P, 0.0], atol=1e-9)


def test_saa_matches_conditional_ergodic_rate(rng):
    M, K, phi, i, n = 3, 3, 0.3, 1, 20_000
    rho = _drop(M, K, rng)
    h_hat_i = sample_channel(rho, phi, rng).h_hat[i]
    p = rng.uniform(5.0, 30.0, (M, K))
    batch = sample_minibatch(rho, phi, i, n, rng)
    saa = saa_sum_rate(h_hat_i, batch, p[i], np.delete(p, i, axis=0))

    others = np.broadcast_to(np.delete(rho.rho, i, axis=0), (n, M - 1, K))
    h_others, e_others = sample_channels(others, phi, rng)
    e_i = complex_gaussian(np.broadcast_to(phi * rho.rho[i], (n, K)), rng)
    h_hat = np.insert(h_others, i, h_hat_i, axis=1)
    err = np.insert(e_others, i, e_i, axis=1)
    direct = batch_rates(h_hat + err, h_hat, np.broadcast_to(p, (n, M, K))).sum(axis=-1)
    se = direct.std(ddof=1) / np.sqrt(n)
    assert abs(saa - direct.mean()) <= 3 * np.sqrt(2.0) * se


def _best_time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def _gradient_time(N, M, K, rng):
    rho = _drop(M, K, rng)
    h_hat = sample_channel(rho, 0.1, rng).h_hat
    batch = sample_minibatch(rho, 0.1, 0, N, rng)
    p = np.full((M, K), 10.0)
    return _best_time(lambda: saa_gradient(h_hat[0], batch, p[0], p[1:], 1e-6))


@pytest.mark.slow
@pytest.mark.parametrize("axis, expected", [("batch", 1.0), ("M", 1.0), ("K", 2.0)])
def test_gradient_cost_scaling(axis, expected):
    rng = np.random.default_rng(9)
    sizes = {"batch": [512, 1024, 2048, 4096], "M": [2, 4, 8, 16], "K": [1, 2, 4, 8]}[axis]
    times = []
    for s in sizes:
        N, M, K = {"batch": (s, 8, 4), "M": (4096, s, 4), "K": (4096, 8, s)}[axis]
        times.append(_gradient_time(N, M, K, rng))
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    assert abs(slope - expected) <= 0.25


@pytest.mark.slow
def test_csgd_beats_equal_power():
    M, K, phi, P = 4, 4, 0.1, 100.0
    config = CsgdConfig()
    csgd, equal = [], []
    for n in range(500):
        rng = make_stream(2022, "test", n)
        rho = _drop(M, K, rng)
        chan = sample_channel(rho, phi, rng)
        result = run_csgd(rho, chan.h_hat, phi, config, make_stream(2022, "csgd", n), P, err=chan.err)
        csgd.append(sum_rate(chan, result.allocation))
        equal.append(sum_rate(chan, np.full((M, K), P / K)))
    assert np.mean(csgd) >= 1.15 * np.mean(equal)
