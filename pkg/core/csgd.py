"""
Cooperative stochastic gradient descent (the upper-bound optimizer).

Every iteration each AP i
  1. receives the other APs' current allocations p_{-i} (Jacobi exchange),
  2. draws a mini-batch of the quantities it cannot observe: its own
     estimation error e_i and the other APs' estimates and errors,
  3. takes a projected gradient-ascent step on the sample-average sum-rate,
     treating p_{-i} as constant.

AP i's own estimate h_hat_i is known locally and is never sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from core.netenv import (
    ChannelRealization,
    LongTermCsi,
    check_phi,
    complex_gaussian,
    sample_channels,
)
from core.objective import (
    beam_phase,
    link_gains,
    rate_and_amplitude_grad,
    rates_from_gains,
    sum_rate,
)
from utils import constants
from utils.errors import ConfigError, ShapeError
from utils.logger import log_event

READINGS = ("local", "literal")
SCHEDULES = ("normalized", "constant", "inv_sqrt")
MONITORS = ("exact", "saa")


# ────────────────────────────────────────────────────────────────
# Domain types
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CsgdConfig:
    """Step and stopping settings of one CSGD run.

    ``constant`` and ``inv_sqrt`` apply p_i + alpha * grad literally
    (alpha defaults to 0.01*P/K, divided by sqrt(t) for inv_sqrt).
    ``normalized`` moves the largest gradient entry by alpha / sqrt(t) and
    the others in proportion; alpha then defaults to CSGD_STEP_FRACTION*P/K.
    The stop rule watches the exact sum-rate (``monitor="exact"``) or the
    mean per-AP SAA value (``"saa"``) and is not checked before min_iter.
    """

    alpha: Optional[float] = None
    L: int = constants.CSGD_MAX_ITER
    batch_size: int = constants.CSGD_BATCH
    tol: float = constants.CSGD_TOL
    power_floor: Optional[float] = None
    window: int = constants.CSGD_WINDOW
    step_schedule: str = "normalized"
    gamma_reading: str = "local"
    monitor: str = "exact"
    min_iter: int = constants.CSGD_MIN_ITER

    def __post_init__(self):
        if self.alpha is not None and not self.alpha >= 0:
            raise ConfigError("alpha", f"step size must be >= 0, got {self.alpha}")
        if self.L < 1:
            raise ConfigError("L", f"need at least one iteration, got {self.L}")
        if self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")
        if self.tol < 0:
            raise ConfigError("tol", f"must be >= 0, got {self.tol}")
        if self.window < 1:
            raise ConfigError("window", f"must be >= 1, got {self.window}")
        if self.min_iter < 0:
            raise ConfigError("min_iter", f"must be >= 0, got {self.min_iter}")
        if self.step_schedule not in SCHEDULES:
            raise ConfigError("step_schedule", f"expected one of {SCHEDULES}")
        if self.gamma_reading not in READINGS:
            raise ConfigError("gamma_reading", f"expected one of {READINGS}")
        if self.monitor not in MONITORS:
            raise ConfigError("monitor", f"expected one of {MONITORS}")

    def resolved_alpha(self, P: float, K: int) -> float:
        if self.alpha is not None:
            return self.alpha
        if self.step_schedule == "normalized":
            return constants.CSGD_STEP_FRACTION * P / K
        return constants.CSGD_ALPHA_FRACTION * P / K

    def step(self, grad: np.ndarray, t: int, P: float, K: int) -> np.ndarray:
        """Increment added to p_i before projection at iteration t (0-based)."""
        alpha = self.resolved_alpha(P, K)
        if self.step_schedule == "constant":
            return alpha * grad
        alpha = alpha / math.sqrt(t + 1)
        if self.step_schedule == "inv_sqrt":
            return alpha * grad
        scale = float(np.max(np.abs(grad)))
        if scale == 0.0:
            return np.zeros_like(grad)
        return (alpha / scale) * grad

    def resolved_floor(self, P: float) -> float:
        if self.power_floor is not None:
            return self.power_floor
        return constants.CSGD_FLOOR_FRACTION * P


@dataclass
class MiniBatch:
    """Samples b_i^(n) for AP i; the other-AP blocks keep AP order with i removed."""

    i: int
    e_i: np.ndarray                      # (N, K)
    h_hat_others: np.ndarray             # (N, M-1, K)
    e_others: np.ndarray                 # (N, M-1, K)
    h_hat_i_sampled: Optional[np.ndarray] = None   # (N, K), literal reading only

    @property
    def size(self) -> int:
        return self.e_i.shape[0]

    @property
    def M(self) -> int:
        return self.h_hat_others.shape[1] + 1

    def duplicated(self) -> "MiniBatch":
        def twice(x):
            return None if x is None else np.concatenate([x, x], axis=0)

        return MiniBatch(self.i, twice(self.e_i), twice(self.h_hat_others),
                         twice(self.e_others), twice(self.h_hat_i_sampled))


@dataclass
class CsgdState:
    rho: LongTermCsi
    h_hat: np.ndarray
    phi: float
    P: float
    p: np.ndarray
    streams: list
    iteration: int = 0
    exchanged_per_ap: int = 0
    saa_values: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class TraceRow:
    iteration: int
    exact_sum_rate: float
    saa_values: list
    exchanged_reals: int


@dataclass
class CsgdResult:
    allocation: np.ndarray
    trace: list
    iterations: int
    converged: bool


# ────────────────────────────────────────────────────────────────
# SAA objective and gradient
# ────────────────────────────────────────────────────────────────

def sample_minibatch(
    rho: LongTermCsi,
    phi: float,
    i: int,
    batch_size: int,
    rng: np.random.Generator,
    reading: str = "local",
) -> MiniBatch:
    if not 0 <= i < rho.M:
        raise ConfigError("i", f"AP index {i} out of range for M={rho.M}")
    phi = check_phi(phi)
    rho_i = np.broadcast_to(rho.rho[i], (batch_size, rho.K))
    others = np.broadcast_to(np.delete(rho.rho, i, axis=0), (batch_size, rho.M - 1, rho.K))

    e_i = complex_gaussian(phi * rho_i, rng)
    h_others, e_others = sample_channels(others, phi, rng)
    sampled = complex_gaussian((1.0 - phi) * rho_i, rng) if reading == "literal" else None
    return MiniBatch(i, e_i, h_others, e_others, sampled)


def _place(others: np.ndarray, own: np.ndarray, i: int) -> np.ndarray:
    """Put AP i's block back at position i of the (..., M-1, K) stack."""
    own = np.asarray(own)[..., None, :]
    return np.concatenate([others[..., :i, :], own, others[..., i:, :]], axis=-2)


def _full_power(p_i: np.ndarray, p_minus_i: np.ndarray, i: int) -> np.ndarray:
    p_i = np.asarray(p_i, dtype=np.float64)
    p_minus_i = np.asarray(p_minus_i, dtype=np.float64).reshape(-1, p_i.shape[0])
    return _place(p_minus_i, p_i, i)


def batch_gains(h_hat_i: np.ndarray, batch: MiniBatch) -> np.ndarray:
    """Link gains G (N, K, K, M) of every batch sample as seen by AP i."""
    i = batch.i
    h_hat_i = np.asarray(h_hat_i, dtype=np.complex128)
    if h_hat_i.shape != batch.e_i.shape[1:]:
        raise ShapeError("h_hat_i", batch.e_i.shape[1:], h_hat_i.shape)

    own_actual = h_hat_i[None, :] + batch.e_i
    own_phase = np.broadcast_to(beam_phase(h_hat_i), own_actual.shape)
    h = _place(batch.h_hat_others + batch.e_others, own_actual, i)
    u = _place(beam_phase(batch.h_hat_others), own_phase, i)
    G = link_gains(h, u)

    if batch.h_hat_i_sampled is not None:
        # interfering beams of AP i built from the sampled estimate
        K = h_hat_i.shape[0]
        sampled = own_actual[:, :, None] * beam_phase(batch.h_hat_i_sampled)[:, None, :]
        G[..., i] = np.where(np.eye(K, dtype=bool), G[..., i], sampled)
    return G


def saa_sum_rate(h_hat_i, batch: MiniBatch, p_i, p_minus_i) -> float:
    """(1/|B|) sum_n sum_k log2(1 + gamma_bar_{k,i})."""
    p = _full_power(p_i, p_minus_i, batch.i)
    G = batch_gains(h_hat_i, batch)
    rates = rates_from_gains(G, np.sqrt(np.maximum(p, 0.0)))
    return float(rates.sum(axis=-1).mean())


def saa_gradient(h_hat_i, batch: MiniBatch, p_i, p_minus_i, power_floor: float) -> np.ndarray:
    """Analytic gradient of saa_sum_rate with respect to p_i; O(|B| M K^2)."""
    return saa_value_and_gradient(h_hat_i, batch, p_i, p_minus_i, power_floor)[1]


def saa_value_and_gradient(h_hat_i, batch: MiniBatch, p_i, p_minus_i,
                           power_floor: float) -> tuple[float, np.ndarray]:
    """saa_sum_rate and saa_gradient from one pass over the batch gains."""
    p_i = np.asarray(p_i, dtype=np.float64)
    if np.any(p_i < power_floor):
        raise ConfigError("p_i", f"entries below power_floor={power_floor} (clamp first)")
    p = _full_power(p_i, p_minus_i, batch.i)
    G = batch_gains(h_hat_i, batch)
    rate, grad_a = rate_and_amplitude_grad(G, np.sqrt(p))
    return float(rate.mean()), grad_a[:, batch.i, :].mean(axis=0) / (2.0 * np.sqrt(p_i))


def project_feasible(v: np.ndarray, P: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= P} (sort-based threshold)."""
    v = np.asarray(v, dtype=np.float64)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= P:
        return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - P
    ind = np.arange(1, v.shape[0] + 1)
    active = u - css / ind > 0
    r = ind[active][-1]
    theta = css[active][-1] / r
    return np.maximum(v - theta, 0.0)


# ────────────────────────────────────────────────────────────────
# Iteration
# ────────────────────────────────────────────────────────────────

def init_state(rho: LongTermCsi, h_hat: np.ndarray, phi: float, P: float,
               rng: np.random.Generator) -> CsgdState:
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    if h_hat.shape != rho.rho.shape:
        raise ShapeError("h_hat", rho.rho.shape, h_hat.shape)
    if not P > 0:
        raise ConfigError("P", f"power budget must be > 0, got {P}")
    streams = [np.random.default_rng(s) for s in
               np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(rho.M)]
    p = np.full(rho.rho.shape, P / (2.0 * rho.K))
    return CsgdState(rho, h_hat, check_phi(phi), P, p, streams)


def csgd_step(state: CsgdState, config: CsgdConfig,
              batches: Optional[list] = None) -> np.ndarray:
    """One synchronous round: every AP updates from the last exchanged p.

    *batches* replaces the fresh per-AP draws (one MiniBatch per AP).
    saa_values are measured at the exchanged point, clamped to the floor.
    """
    M, K = state.p.shape
    exchanged = state.p.copy()
    floor = config.resolved_floor(state.P)

    updated = np.empty_like(exchanged)
    saa = np.empty(M)
    for i in range(M):
        batch = batches[i] if batches is not None else sample_minibatch(
            state.rho, state.phi, i, config.batch_size, state.streams[i], config.gamma_reading)
        p_minus_i = np.delete(exchanged, i, axis=0)
        p_i = np.maximum(exchanged[i], floor)
        saa[i], grad = saa_value_and_gradient(state.h_hat[i], batch, p_i, p_minus_i, floor)
        step = config.step(grad, state.iteration, state.P, K)
        updated[i] = project_feasible(exchanged[i] + step, state.P)

    state.p = updated
    state.iteration += 1
    state.exchanged_per_ap += M * K
    state.saa_values = saa
    return updated


def _settled(monitor: list, config: CsgdConfig) -> bool:
    """Relative change between the last two window means is within tol."""
    w = config.window
    if len(monitor) < max(2 * w, config.min_iter):
        return False
    recent = float(np.mean(monitor[-w:]))
    previous = float(np.mean(monitor[-2 * w:-w]))
    return abs(recent - previous) <= config.tol * max(abs(previous), 1e-12)


def run_csgd(
    rho: LongTermCsi,
    h_hat: np.ndarray,
    phi: float,
    config: CsgdConfig,
    rng: np.random.Generator,
    P: float,
    err: Optional[np.ndarray] = None,
    verbose: bool = False,
) -> CsgdResult:
    """Run CSGD to convergence; returns the best allocation seen and the trace.

    The exact sum-rate uses h_hat + err when *err* is given, otherwise the
    realization is taken as error-free.  With ``monitor="exact"`` it drives
    both the stop rule and the best-so-far choice (the starting point
    included); with ``"saa"`` the mean per-AP SAA value does.
    """
    state = init_state(rho, h_hat, phi, P, rng)
    truth = ChannelRealization(
        state.h_hat, np.zeros_like(state.h_hat) if err is None else err, rho, state.phi)
    exact_monitor = config.monitor == "exact"

    trace: list[TraceRow] = []
    monitor: list[float] = []
    best_p = state.p.copy()
    best_value = sum_rate(truth, best_p) if exact_monitor else -math.inf
    converged = False

    for t in range(config.L):
        before = state.p.copy()
        csgd_step(state, config)
        exact = sum_rate(truth, state.p)
        trace.append(TraceRow(t + 1, exact, state.saa_values.tolist(), state.exchanged_per_ap))

        if exact_monitor:
            value, candidate = exact, state.p.copy()
        else:
            # saa_values were measured at the pre-update point
            value, candidate = float(state.saa_values.mean()), before
        monitor.append(value)
        if value > best_value:
            best_value, best_p = value, candidate

        if _settled(monitor, config):
            converged = True
            break

    if verbose:
        log_event("csgd", f"CSGD stopped after {state.iteration} iterations "
                          f"(converged={converged}, best {config.monitor}={best_value:.4f})", ok=True)
    return CsgdResult(best_p, trace, state.iteration, converged)
