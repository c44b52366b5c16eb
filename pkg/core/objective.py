"""
Sum-rate objective under decentralized conjugate beamforming.

For UE k the received amplitude of UE l's stream is

    A[k, l] = sum_i h[i, k] * u[i, l] * sqrt(p[i, l]),   u = conj(h_hat) / |h_hat|

and the SINR is |A[k, k]|^2 / (1 + sum_{l != k} |A[k, l]|^2) with unit noise
power, so SNR in dB is 10 log10(P).

The kernel works on stacks: every array may carry leading sample axes.
`link_gains` builds G[..., k, l, i] = h[i, k] u[i, l] once; the amplitudes,
the rates and the gradient with respect to the amplitudes a = sqrt(p) all
reuse it.  CSGD and the cooperative-learning trainer call the same kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from core.netenv import ChannelRealization, LongTermCsi, check_phi, sample_channel
from utils import constants
from utils.errors import ConfigError, PolicyError, ShapeError

LN2 = math.log(2.0)


# ────────────────────────────────────────────────────────────────
# Domain types
# ────────────────────────────────────────────────────────────────

@dataclass
class PowerAllocation:
    """p[i, k] is the power AP i spends on UE k."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 2:
            raise ShapeError("power allocation", "M x K matrix", self.p.shape)

    @property
    def M(self) -> int:
        return self.p.shape[0]

    @property
    def K(self) -> int:
        return self.p.shape[1]

    def is_feasible(self, P: float, tol: float = constants.FEASIBILITY_TOL) -> bool:
        return check_feasible(self, P, tol)[0]


@dataclass
class RateReport:
    per_ue_rates: np.ndarray
    sum_rate: float
    sample_count: int
    std_error: float = 0.0

    def csv_row(self, *, config_hash: str, M: int, K: int, P: float, phi: float,
                method: str, seed: int) -> dict:
        return {
            "config_hash": config_hash,
            "M": M,
            "K": K,
            "P_dB": repr(round(10.0 * math.log10(P), 6)),
            "phi": repr(float(phi)),
            "method": method,
            "mean_sum_rate": repr(float(self.sum_rate)),
            "std_error": repr(float(self.std_error)),
            "n_samples": self.sample_count,
            "seed": seed,
        }


PowerPolicy = Callable[[LongTermCsi, np.ndarray], Union[PowerAllocation, np.ndarray]]


# ────────────────────────────────────────────────────────────────
# Kernel
# ────────────────────────────────────────────────────────────────

def beam_phase(h_hat: np.ndarray) -> np.ndarray:
    """conj(h_hat) / |h_hat|, defined as 0 where the estimate vanishes."""
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    mag = np.abs(h_hat)
    safe = np.where(mag < constants.PHASE_EPS, 1.0, mag)
    return np.where(mag < constants.PHASE_EPS, 0.0, np.conj(h_hat) / safe)


def link_gains(h: np.ndarray, u: np.ndarray) -> np.ndarray:
    """G[..., k, l, i] = h[..., i, k] * u[..., i, l]."""
    return np.einsum("...ik,...il->...kli", h, u)


def amplitudes(G: np.ndarray, a: np.ndarray) -> np.ndarray:
    """A[..., k, l] = sum_i G[..., k, l, i] a[..., i, l]."""
    return np.einsum("...kli,...il->...kl", G, a)


def _powers(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    power = A.real ** 2 + A.imag ** 2
    K = power.shape[-1]
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    off = power * (1.0 - np.eye(K))
    return signal, off.sum(axis=-1)


def sinr_from_gains(G: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Per-UE SINR (..., K) for link gains G and amplitudes a = sqrt(p)."""
    signal, interference = _powers(amplitudes(G, a))
    return signal / (1.0 + interference)


def rates_from_gains(G: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Per-UE rates log2(1 + SINR), shape (..., K)."""
    return np.log2(1.0 + sinr_from_gains(G, a))


def rate_and_amplitude_grad(G: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum-rate (...,) and its gradient with respect to a, shape (..., M, K).

    Writes R = sum_k log2(1 + T_k) - log2(1 + I_k) with T_k the total and
    I_k the interference power at UE k; d|A[k,l]|^2 / da[i,l] =
    2 Re(conj(A[k,l]) G[k,l,i]).
    """
    A = amplitudes(G, a)
    signal, interference = _powers(A)
    total = signal + interference
    rate = (np.log2(1.0 + total) - np.log2(1.0 + interference)).sum(axis=-1)

    K = A.shape[-1]
    off_diag = 1.0 - np.eye(K)
    w = (1.0 / ((1.0 + total) * LN2))[..., :, None] \
        - off_diag * (1.0 / ((1.0 + interference) * LN2))[..., :, None]
    contrib = np.real(np.conj(A)[..., None] * G)
    grad = 2.0 * np.einsum("...kl,...kli->...il", w, contrib)
    return rate, grad


def batch_rates(h: np.ndarray, h_hat: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Per-UE rates for stacked realizations: h, h_hat, p of shape (..., M, K)."""
    G = link_gains(h, beam_phase(h_hat))
    return rates_from_gains(G, np.sqrt(np.maximum(p, 0.0)))


# ────────────────────────────────────────────────────────────────
# Operations
# ────────────────────────────────────────────────────────────────

def _as_matrix(p: PowerAllocation | np.ndarray) -> np.ndarray:
    return p.p if isinstance(p, PowerAllocation) else np.asarray(p, dtype=np.float64)


def _check_dims(chan: ChannelRealization, p: np.ndarray) -> None:
    if p.shape != chan.h_hat.shape:
        raise ShapeError("power allocation", chan.h_hat.shape, p.shape)


def sinr_all(chan: ChannelRealization, p: PowerAllocation | np.ndarray) -> np.ndarray:
    p = _as_matrix(p)
    _check_dims(chan, p)
    G = link_gains(chan.actual(), beam_phase(chan.h_hat))
    return sinr_from_gains(G, np.sqrt(np.maximum(p, 0.0)))


def sinr(chan: ChannelRealization, p: PowerAllocation | np.ndarray, k: int) -> float:
    if not 0 <= k < chan.K:
        raise ConfigError("k", f"UE index {k} out of range for K={chan.K}")
    return float(sinr_all(chan, p)[k])


def sum_rate(chan: ChannelRealization, p: PowerAllocation | np.ndarray) -> float:
    return float(np.log2(1.0 + sinr_all(chan, p)).sum())


def check_feasible(
    p: PowerAllocation | np.ndarray,
    P: float,
    tol: float = constants.FEASIBILITY_TOL,
) -> tuple[bool, np.ndarray]:
    """Feasibility of p against the per-AP budget; returns (ok, slack per AP).

    *tol* is relative to P.
    """
    p = _as_matrix(p)
    slack = P - p.sum(axis=-1)
    abs_tol = tol * P
    ok = bool(np.all(p >= -abs_tol) and np.all(slack >= -abs_tol))
    return ok, slack


def ergodic_sum_rate(
    rho: LongTermCsi,
    policy: PowerPolicy,
    phi: float,
    n_samples: int,
    rng: np.random.Generator,
) -> RateReport:
    """Monte-Carlo mean sum-rate of *policy* over fresh channel draws.

    The policy sees (rho, h_hat) only, never the estimation error.
    """
    if n_samples < 1:
        raise ConfigError("n_samples", f"need at least one sample, got {n_samples}")
    phi = check_phi(phi)

    per_sample = np.empty((n_samples, rho.K))
    for n in range(n_samples):
        chan = sample_channel(rho, phi, rng)
        try:
            p = _as_matrix(policy(rho, chan.h_hat))
        except Exception as e:
            raise PolicyError(n, e) from e
        per_sample[n] = np.log2(1.0 + sinr_all(chan, p))

    return summarize(per_sample)


def summarize(per_sample_rates: np.ndarray) -> RateReport:
    """Fold an (n, K) array of per-UE rates into a RateReport."""
    n = per_sample_rates.shape[0]
    per_ue = per_sample_rates.mean(axis=0)
    totals = per_sample_rates.sum(axis=1)
    std_error = float(totals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RateReport(per_ue, float(per_ue.sum()), n, std_error)
