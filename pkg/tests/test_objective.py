"""
Sum-rate objective — Test Suite.

Proves:
 Group 1 — SINR
   1.  Single AP, single UE: SINR = p |h|^2
   2.  Vectorised SINR matches a direct per-UE transcription
   3.  A vanishing estimate contributes no beam
   4.  Out-of-range UE index and mismatched shapes raise

 Group 2 — Gradient kernel
   5.  Amplitude gradient matches central finite differences
   6.  Batched rates match per-realization sum_rate

 Group 3 — Feasibility and Monte-Carlo evaluation
   7.  Equal power is feasible; overshoot beyond tol is not
   8.  ergodic_sum_rate reports n samples and a finite standard error
   9.  A failing policy surfaces as PolicyError with the sample index
  10.  RateReport CSV row carries provenance

 Group 4 — Invariants
  11.  SINR ignores common per-AP and per-UE phase rotations of h and h_hat
  12.  SINR is nondecreasing in p_{k,i} when every other power is zero
  13.  A zero-power policy scores exactly 0
  14.  Orthogonal links decouple into single-user rates
  15.  The standard error shrinks as 1/sqrt(n)
  16.  The equal-power mean is reproducible from a seed
"""
import math

import numpy as np
import pytest

from core.netenv import ChannelRealization, LongTermCsi, sample_channel
from core.objective import (
    PowerAllocation,
    batch_rates,
    beam_phase,
    check_feasible,
    ergodic_sum_rate,
    link_gains,
    rate_and_amplitude_grad,
    sinr,
    sinr_all,
    sum_rate,
)
from utils.errors import ConfigError, PolicyError, ShapeError


def _direct_sinr(h, h_hat, p):
    """Per-UE SINR written out loop by loop."""
    M, K = h.shape
    out = np.empty(K)
    for k in range(K):
        amps = []
        for l in range(K):
            a = 0j
            for i in range(M):
                if abs(h_hat[i, l]) > 0:
                    a += h[i, k] * np.conj(h_hat[i, l]) / abs(h_hat[i, l]) * math.sqrt(p[i, l])
            amps.append(abs(a) ** 2)
        out[k] = amps[k] / (1.0 + sum(amps) - amps[k])
    return out


# ────────────────────────────────────────────────────────────────
# Group 1 — SINR
# ────────────────────────────────────────────────────────────────

def test_single_link_sinr():
    h = np.array([[0.3 - 0.4j]])
    chan = ChannelRealization(h, np.zeros_like(h), LongTermCsi(np.array([[1.0]])), 0.0)
    assert sinr(chan, np.array([[8.0]]), 0) == pytest.approx(8.0 * 0.25)
    assert sum_rate(chan, np.array([[8.0]])) == pytest.approx(math.log2(3.0))


def test_sinr_matches_direct_transcription(rng):
    rho = LongTermCsi(rng.random((3, 3)) + 0.2)
    chan = sample_channel(rho, 0.2, rng)
    p = rng.random((3, 3)) * 5.0
    np.testing.assert_allclose(sinr_all(chan, p), _direct_sinr(chan.actual(), chan.h_hat, p),
                               rtol=1e-12)


def test_zero_estimate_has_no_phase():
    u = beam_phase(np.array([0.0 + 0.0j, 2.0j]))
    np.testing.assert_array_equal(u, np.array([0.0, -1.0j]))


def test_bad_arguments(small_rho, rng):
    chan = sample_channel(small_rho, 0.1, rng)
    with pytest.raises(ConfigError):
        sinr(chan, np.ones((3, 2)), 5)
    with pytest.raises(ShapeError):
        sinr_all(chan, np.ones((2, 2)))


# ────────────────────────────────────────────────────────────────
# Group 2 — Gradient kernel
# ────────────────────────────────────────────────────────────────

def test_amplitude_gradient_finite_differences(rng):
    M, K = 3, 3
    h = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
    h_hat = h + 0.3 * (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K)))
    G = link_gains(h, beam_phase(h_hat))
    a = rng.random((M, K)) + 0.5
    _, grad = rate_and_amplitude_grad(G, a)

    step = 1e-6
    fd = np.empty_like(a)
    for idx in np.ndindex(a.shape):
        up, down = a.copy(), a.copy()
        up[idx] += step
        down[idx] -= step
        fd[idx] = (rate_and_amplitude_grad(G, up)[0] - rate_and_amplitude_grad(G, down)[0]) / (2 * step)
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)


def test_batch_rates_match_sum_rate(small_rho, rng):
    chans = [sample_channel(small_rho, 0.1, rng) for _ in range(4)]
    p = rng.random((4,) + small_rho.rho.shape)
    h = np.stack([c.actual() for c in chans])
    h_hat = np.stack([c.h_hat for c in chans])
    rates = batch_rates(h, h_hat, p).sum(axis=-1)
    for n, c in enumerate(chans):
        assert rates[n] == pytest.approx(sum_rate(c, p[n]), rel=1e-12)


# ────────────────────────────────────────────────────────────────
# Group 3 — Feasibility and evaluation
# ────────────────────────────────────────────────────────────────

def test_check_feasible():
    P = 100.0
    ok, slack = check_feasible(np.full((2, 4), P / 4), P)
    assert ok
    np.testing.assert_allclose(slack, 0.0, atol=1e-12)
    assert not check_feasible(np.array([[P * (1 + 1e-6), 0.0]]), P)[0]
    assert not check_feasible(np.array([[-1e-3, 0.0]]), P)[0]
    assert PowerAllocation(np.array([[P, 0.0]])).is_feasible(P)


def test_ergodic_sum_rate(small_rho, rng):
    def equal(rho, h_hat):
        return np.full(rho.rho.shape, 100.0 / rho.K)

    report = ergodic_sum_rate(small_rho, equal, 0.1, 50, rng)
    assert report.sample_count == 50
    assert report.per_ue_rates.shape == (2,)
    assert report.sum_rate == pytest.approx(report.per_ue_rates.sum())
    assert report.sum_rate > 0 and math.isfinite(report.std_error)


def test_policy_failure_reported(small_rho, rng):
    def broken(rho, h_hat):
        raise RuntimeError("boom")

    with pytest.raises(PolicyError) as info:
        ergodic_sum_rate(small_rho, broken, 0.1, 3, rng)
    assert info.value.sample_index == 0


def test_csv_row_provenance(small_rho, rng):
    report = ergodic_sum_rate(small_rho, lambda r, h: np.ones(r.rho.shape), 0.0, 5, rng)
    row = report.csv_row(config_hash="abc123", M=3, K=2, P=100.0, phi=0.0, method="EQUAL", seed=9)
    assert row["P_dB"] == "20.0"
    assert row["n_samples"] == 5 and row["seed"] == 9 and row["config_hash"] == "abc123"
    assert float(row["mean_sum_rate"]) == report.sum_rate


# ────────────────────────────────────────────────────────────────
# Group 4 — Invariants
# ────────────────────────────────────────────────────────────────

def test_common_phase_rotation_invariance(rng):
    rho = LongTermCsi(rng.random((4, 3)) + 0.1)
    chan = sample_channel(rho, 0.3, rng)
    p = rng.random((4, 3)) * 10.0
    base = sinr_all(chan, p)
    for _ in range(20):
        per_ap = rng.uniform(0, 2 * np.pi, (4, 1))
        per_ue = rng.uniform(0, 2 * np.pi, (1, 3))
        rot = np.exp(1j * (per_ap + per_ue))
        turned = ChannelRealization(chan.h_hat * rot, chan.err * rot, rho, 0.3)
        np.testing.assert_allclose(sinr_all(turned, p), base, rtol=1e-12)


def test_sinr_monotone_in_own_power(rng):
    rho = LongTermCsi(rng.random((3, 3)) + 0.1)
    chan = sample_channel(rho, 0.3, rng)
    for i, k in [(0, 0), (1, 2), (2, 1)]:
        values = []
        for x in np.linspace(0.0, 50.0, 26):
            p = np.zeros((3, 3))
            p[i, k] = x
            values.append(sinr(chan, p, k))
        assert np.all(np.diff(values) >= 0)
        assert values[-1] > 0


def test_zero_power_gives_zero_rate(small_rho, rng):
    report = ergodic_sum_rate(small_rho, lambda r, h: np.zeros(r.rho.shape), 0.2, 20, rng)
    assert report.sum_rate == 0.0
    assert np.all(report.per_ue_rates == 0.0)


def test_orthogonal_links_decouple(rng):
    K = 3
    gains = rng.random(K) + 0.2
    h = np.diag(np.sqrt(gains) * np.exp(1j * rng.uniform(0, 2 * np.pi, K)))
    chan = ChannelRealization(h, np.zeros_like(h), LongTermCsi(np.ones((K, K))), 0.0)
    p = rng.random((K, K)) * 20.0
    single = np.log2(1.0 + np.diag(p) * gains).sum()
    assert sum_rate(chan, p) == pytest.approx(single, rel=1e-12)


def test_standard_error_shrinks_as_inverse_sqrt(small_rho):
    def equal(rho, h_hat):
        return np.full(rho.rho.shape, 100.0 / rho.K)

    rng = np.random.default_rng(31)
    small = [ergodic_sum_rate(small_rho, equal, 0.1, 25, rng) for _ in range(60)]
    large = [ergodic_sum_rate(small_rho, equal, 0.1, 400, rng) for _ in range(60)]
    reported = np.mean([r.std_error for r in small]) / np.mean([r.std_error for r in large])
    assert 3.2 <= reported <= 5.0
    spread = np.std([r.sum_rate for r in small]) / np.std([r.sum_rate for r in large])
    assert 2.5 <= spread <= 6.5


def test_equal_power_mean_reproducible(small_rho):
    def equal(rho, h_hat):
        return np.full(rho.rho.shape, 100.0 / rho.K)

    a = ergodic_sum_rate(small_rho, equal, 0.1, 200, np.random.default_rng(4))
    b = ergodic_sum_rate(small_rho, equal, 0.1, 200, np.random.default_rng(4))
    assert a.sum_rate == b.sum_rate and a.std_error == b.std_error
