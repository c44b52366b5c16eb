"""
Cooperative learning: three parameter-shared networks that turn long-term
and local short-term CSI into a feasible power allocation with a single
fronthaul round.

  uplink    m_i = V(rho'_i)                      (same V at every AP)
  CP        f   = mean_i F(m_i)                  (average pooling, any M)
  decision  p_i = head(D(f, rho'_i, h_hat_i))    (same D at every AP)

The head maps D's K+1 raw outputs to powers: the first K become
nonnegative ratios, the last one a total power delta in [0, P] through a
scaled ReLU6, and p_{k,i} = delta_i * d_{k,i} / sum_l d_{l,i}.

Methods:
  CL   learned messages (d_U, d_D >= 1)
  NCL  no messages (d_U = d_D = 0)
  SCL  hand-crafted messages; only D is learned
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from core.netenv import (
    GeometryConfig,
    LongTermCsi,
    make_stream,
    normalize_longterm,
    sample_channels,
    sample_deployments,
)
from core.neuralcore import (
    AdamState,
    Mlp,
    adam_update,
    relu6_backward,
    relu6_forward,
    relu_backward,
    relu_forward,
    softplus_backward,
    softplus_forward,
)
from core.objective import (
    PowerAllocation,
    beam_phase,
    link_gains,
    rate_and_amplitude_grad,
    rates_from_gains,
)
from utils import constants
from utils.errors import ConfigError, DivergenceError, ShapeError
from utils.logger import log_event

METHODS = ("CL", "NCL", "SCL")
RATIO_ACTIVATIONS = ("softplus", "relu")
H_ENCODINGS = ("raw", "unit")


# ────────────────────────────────────────────────────────────────
# Configuration
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PhiPolicy:
    """Error-ratio sampling for training: ``fixed:<v>`` or ``uniform``."""

    kind: str = "uniform"
    value: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "PhiPolicy":
        text = str(text).strip().lower()
        if text == "uniform":
            return cls("uniform")
        if text.startswith("fixed:"):
            try:
                value = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError("phi_policy", f"bad fixed value in {text!r}")
            if not 0.0 <= value <= 1.0:
                raise ConfigError("phi_policy", f"fixed phi must lie in [0, 1], got {value}")
            return cls("fixed", value)
        raise ConfigError("phi_policy", f"expected 'fixed:<v>' or 'uniform', got {text!r}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.random(n)
        return np.full(n, self.value)

    def __str__(self) -> str:
        return "uniform" if self.kind == "uniform" else f"fixed:{self.value:g}"


@dataclass(frozen=True)
class ClConfig:
    K: int
    method: str = "CL"
    d_U: Optional[int] = None
    d_D: Optional[int] = None
    hidden_depth: int = constants.HIDDEN_DEPTH
    hidden_width: Optional[int] = None
    phi_sampling: PhiPolicy = field(default_factory=PhiPolicy)
    epochs: int = constants.EPOCHS
    steps_per_epoch: int = constants.STEPS_PER_EPOCH
    batch_size: int = constants.TRAIN_BATCH
    learning_rate: float = constants.LEARNING_RATE
    M_train: int = constants.M_TRAIN
    P: float = 100.0
    ratio_activation: str = "softplus"
    h_encoding: str = "raw"
    validation_samples: int = 256
    geometry: GeometryConfig = field(default_factory=GeometryConfig)

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K", f"need at least one UE, got {self.K}")
        if self.method not in METHODS:
            raise ConfigError("method", f"expected one of {METHODS}, got {self.method!r}")

        d_U = self.K if self.d_U is None else self.d_U
        d_D = self.K if self.d_D is None else self.d_D
        if self.method == "CL" and d_U == 0 and d_D == 0:
            object.__setattr__(self, "method", "NCL")
        if self.method == "NCL":
            d_U = d_D = 0
        elif self.method == "SCL":
            d_U = d_D = self.K
        elif d_U < 1 or d_D < 1:
            raise ConfigError("d_U/d_D", "CL needs both message lengths >= 1 (0/0 selects NCL)")
        object.__setattr__(self, "d_U", d_U)
        object.__setattr__(self, "d_D", d_D)
        if self.hidden_width is None:
            object.__setattr__(self, "hidden_width", constants.HIDDEN_WIDTH_PER_UE * self.K)

        if self.hidden_depth < 0 or self.hidden_width < 1:
            raise ConfigError("hidden", "depth must be >= 0 and width >= 1")
        if self.epochs < 0 or self.steps_per_epoch < 1:
            raise ConfigError("epochs", "epochs >= 0 and steps_per_epoch >= 1 required")
        if self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", "must be >= 0")
        if self.M_train < 1:
            raise ConfigError("M_train", f"need at least one AP, got {self.M_train}")
        if not self.P > 0:
            raise ConfigError("P", f"power budget must be > 0, got {self.P}")
        if self.ratio_activation not in RATIO_ACTIVATIONS:
            raise ConfigError("ratio_activation", f"expected one of {RATIO_ACTIVATIONS}")
        if self.h_encoding not in H_ENCODINGS:
            raise ConfigError("h_encoding", f"expected one of {H_ENCODINGS}")

    @property
    def decision_inputs(self) -> int:
        return self.d_D + 3 * self.K

    @property
    def hidden(self) -> list[int]:
        return [self.hidden_width] * self.hidden_depth


# ────────────────────────────────────────────────────────────────
# Model
# ────────────────────────────────────────────────────────────────

@dataclass
class ClModel:
    config: ClConfig
    theta_V: Optional[Mlp]
    theta_F: Optional[Mlp]
    theta_D: Mlp
    tags: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, config: ClConfig, rng: np.random.Generator) -> "ClModel":
        theta_V = theta_F = None
        if config.method == "CL":
            theta_V = Mlp(config.K, config.hidden, config.d_U, rng)
            theta_F = Mlp(config.d_U, config.hidden, config.d_D, rng)
        theta_D = Mlp(config.decision_inputs, config.hidden, config.K + 1, rng)
        return cls(config, theta_V, theta_F, theta_D)

    @property
    def method(self) -> str:
        return self.config.method

    @property
    def K(self) -> int:
        return self.config.K

    def networks(self) -> dict:
        nets = {"V": self.theta_V, "F": self.theta_F, "D": self.theta_D}
        return {name: net for name, net in nets.items() if net is not None}

    def parameters(self) -> dict:
        return {f"{name}.{key}": arr
                for name, net in self.networks().items()
                for key, arr in net.parameters().items()}

    def n_params(self) -> int:
        """Trainable reals; depends on K and the architecture only, never on M."""
        return sum(net.n_params() for net in self.networks().values())


def fronthaul_cost(model: ClModel, M: int) -> dict:
    """Reals moved over the fronthaul for one allocation (single round)."""
    if model.method == "NCL":
        return {"uplink": 0, "downlink": 0, "total": 0}
    if model.method == "SCL":
        up, down = M * model.K, M * model.K
    else:
        up, down = M * model.config.d_U, model.config.d_D
    return {"uplink": up, "downlink": down, "total": up + down}


# ────────────────────────────────────────────────────────────────
# Messages and decision (single realization, inference)
# ────────────────────────────────────────────────────────────────

def _rho_matrix(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, LongTermCsi) else np.asarray(rho, dtype=np.float64)


def _check_K(model: ClModel, K: int, what: str) -> None:
    if K != model.K:
        raise ShapeError(what, f"K={model.K}", f"K={K}")


def uplink_messages(model: ClModel, rho, P: float) -> np.ndarray:
    """m_i = V(rho'_i) for every AP row, shape (M, d_U)."""
    rho = _rho_matrix(rho)
    _check_K(model, rho.shape[-1], "long-term CSI")
    if model.method != "CL":
        return np.zeros((rho.shape[0], 0))
    m, _ = model.theta_V.forward(normalize_longterm(rho, P), mode="infer")
    return m


def aggregate_downlink(model: ClModel, uplink: np.ndarray) -> np.ndarray:
    """f = (1/M) sum_i F(m_i); accepts any number of AP rows."""
    uplink = np.asarray(uplink, dtype=np.float64)
    if uplink.ndim != 2 or uplink.shape[0] < 1:
        raise ShapeError("uplink messages", "(M >= 1, d_U) matrix", uplink.shape)
    if model.method != "CL":
        return np.zeros(0)
    latent, _ = model.theta_F.forward(uplink, mode="infer")
    return latent.mean(axis=0)


def scl_messages(rho, P: float) -> tuple[np.ndarray, np.ndarray]:
    """Hand-crafted messages: m_i = rho_i, f_{k,i} = sqrt(P rho_{k,i} / sum_j rho_{k,j})."""
    rho = _rho_matrix(rho)
    downlink = np.sqrt(P * rho / rho.sum(axis=-2, keepdims=True))
    return rho.copy(), downlink


@dataclass
class MessageSet:
    """One fronthaul round: uplink rows m_i, per-AP latents F(m_i), pooled f."""

    uplink: np.ndarray
    latent: np.ndarray
    downlink: np.ndarray


def exchange_messages(model: ClModel, rho, P: float) -> MessageSet:
    rho = _rho_matrix(rho)
    uplink = uplink_messages(model, rho, P)
    if model.method != "CL":
        empty = np.zeros((rho.shape[0], 0))
        return MessageSet(uplink, empty, np.zeros(0))
    latent, _ = model.theta_F.forward(uplink, mode="infer")
    return MessageSet(uplink, latent, latent.mean(axis=0))


def encode_short_term(h_hat: np.ndarray, rho: np.ndarray, encoding: str = "raw") -> np.ndarray:
    """Interleave (re, im) per UE: (..., K) complex -> (..., 2K) real."""
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    if encoding == "unit":
        h_hat = h_hat / np.sqrt(rho)
    out = np.empty(h_hat.shape[:-1] + (2 * h_hat.shape[-1],))
    out[..., 0::2] = h_hat.real
    out[..., 1::2] = h_hat.imag
    return out


@dataclass
class HeadCache:
    raw: np.ndarray
    ratios: np.ndarray
    total: np.ndarray
    delta: np.ndarray
    P: float


def power_head(raw: np.ndarray, P: float, ratio_activation: str = "softplus"):
    """K+1 raw outputs per row -> K powers summing to delta in [0, P]."""
    K = raw.shape[-1] - 1
    pre_ratio, pre_delta = raw[..., :K], raw[..., K]
    if ratio_activation == "relu":
        ratios = relu_forward(pre_ratio)
    else:
        ratios = softplus_forward(pre_ratio)
    delta = P * relu6_forward(pre_delta) / 6.0
    total = ratios.sum(axis=-1)
    safe = np.where(total > 0.0, total, 1.0)
    p = np.where(total[..., None] > 0.0, delta[..., None] * ratios / safe[..., None], 0.0)
    return p, HeadCache(raw, ratios, total, delta, P)


def power_head_backward(cache: HeadCache, grad_p: np.ndarray,
                        ratio_activation: str = "softplus") -> np.ndarray:
    K = cache.ratios.shape[-1]
    live = (cache.total > 0.0)[..., None]
    safe = np.where(cache.total > 0.0, cache.total, 1.0)[..., None]
    share = cache.ratios / safe
    weighted = (grad_p * share).sum(axis=-1, keepdims=True)
    grad_ratio = np.where(live, cache.delta[..., None] / safe * (grad_p - weighted), 0.0)
    grad_delta = np.where(live[..., 0], weighted[..., 0], 0.0)

    grad_raw = np.empty_like(cache.raw)
    if ratio_activation == "relu":
        grad_raw[..., :K] = relu_backward(cache.raw[..., :K], grad_ratio)
    else:
        grad_raw[..., :K] = softplus_backward(cache.raw[..., :K], grad_ratio)
    grad_raw[..., K] = relu6_backward(cache.raw[..., K], grad_delta) * cache.P / 6.0
    return grad_raw


def decide_power(model: ClModel, f: np.ndarray, rho_prime_i: np.ndarray,
                 h_hat_i: np.ndarray, P: float, rho_i: Optional[np.ndarray] = None) -> np.ndarray:
    """p_i = head(D(f, rho'_i, h_hat_i)) for one AP.

    *rho_i* is only needed for the ``unit`` short-term encoding.
    """
    rho_prime_i = np.asarray(rho_prime_i, dtype=np.float64)
    _check_K(model, rho_prime_i.shape[-1], "rho'_i")
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if f.shape[0] != model.config.d_D:
        raise ShapeError("downlink message", model.config.d_D, f.shape[0])
    if rho_i is None:
        if model.config.h_encoding == "unit":
            raise ConfigError("rho_i", "the unit short-term encoding needs the AP's rho_i")
        rho_i = np.ones_like(rho_prime_i)
    x = np.concatenate([f, rho_prime_i, encode_short_term(h_hat_i, rho_i, model.config.h_encoding)])
    raw, _ = model.theta_D.forward(x[None, :], mode="infer")
    p, _ = power_head(raw[0], P, model.config.ratio_activation)
    return p


def ncl_forward(model: ClModel, rho_i: np.ndarray, h_hat_i: np.ndarray, P: float) -> np.ndarray:
    """Decision from purely local CSI (no messages)."""
    if model.method != "NCL":
        raise ConfigError("method", f"ncl_forward needs an NCL model, got {model.method}")
    rho_i = np.asarray(rho_i, dtype=np.float64)
    return decide_power(model, np.zeros(0), normalize_longterm(rho_i, P), h_hat_i, P, rho_i)


def forward_pass(model: ClModel, rho, h_hat: np.ndarray, P: float) -> PowerAllocation:
    """p = G(rho, h_hat); works for any number of APs."""
    rho = _rho_matrix(rho)
    h_hat = np.asarray(h_hat, dtype=np.complex128)
    if h_hat.shape != rho.shape:
        raise ShapeError("h_hat", rho.shape, h_hat.shape)
    p, _ = _forward_batch(model, rho[None], h_hat[None], P, mode="infer")
    return PowerAllocation(p[0])


def equal_power(M: int, K: int, P: float) -> PowerAllocation:
    if M < 1 or K < 1:
        raise ConfigError("M/K", f"need M, K >= 1, got M={M}, K={K}")
    return PowerAllocation(np.full((M, K), P / K))


# ────────────────────────────────────────────────────────────────
# Batched forward / backward (training and bulk evaluation)
# ────────────────────────────────────────────────────────────────

@dataclass
class ForwardCache:
    B: int
    M: int
    cache_V: Optional[list]
    cache_F: Optional[list]
    cache_D: list
    head: HeadCache


def _forward_batch(model: ClModel, rho: np.ndarray, h_hat: np.ndarray, P: float,
                   mode: str = "infer") -> tuple[np.ndarray, ForwardCache]:
    """rho, h_hat of shape (B, M, K) -> p (B, M, K)."""
    B, M, K = rho.shape
    _check_K(model, K, "long-term CSI")
    cfg = model.config
    rho_prime = normalize_longterm(rho, P)
    cache_V = cache_F = None

    if model.method == "CL":
        m, cache_V = model.theta_V.forward(rho_prime.reshape(B * M, K), mode)
        latent, cache_F = model.theta_F.forward(m, mode)
        f = latent.reshape(B, M, cfg.d_D).mean(axis=1)
        f_rows = np.broadcast_to(f[:, None, :], (B, M, cfg.d_D))
    elif model.method == "SCL":
        _, f_rows = scl_messages(rho, P)
    else:
        f_rows = np.zeros((B, M, 0))

    x = np.concatenate(
        [f_rows, rho_prime, encode_short_term(h_hat, rho, cfg.h_encoding)], axis=-1)
    raw, cache_D = model.theta_D.forward(x.reshape(B * M, cfg.decision_inputs), mode)
    p, head = power_head(raw, P, cfg.ratio_activation)
    return p.reshape(B, M, K), ForwardCache(B, M, cache_V, cache_F, cache_D, head)


def _backward_batch(model: ClModel, cache: ForwardCache, grad_p: np.ndarray) -> dict:
    """Gradients of a scalar loss with respect to every trainable array."""
    B, M, K = grad_p.shape
    cfg = model.config
    grad_raw = power_head_backward(cache.head, grad_p.reshape(B * M, K), cfg.ratio_activation)
    grad_x, grads_D = model.theta_D.backward(cache.cache_D, grad_raw)
    grads = {f"D.{k}": v for k, v in grads_D.items()}

    if model.method == "CL":
        grad_f = grad_x[:, :cfg.d_D].reshape(B, M, cfg.d_D).sum(axis=1)
        grad_latent = np.repeat(grad_f / M, M, axis=0)
        grad_m, grads_F = model.theta_F.backward(cache.cache_F, grad_latent)
        _, grads_V = model.theta_V.backward(cache.cache_V, grad_m)
        grads.update({f"F.{k}": v for k, v in grads_F.items()})
        grads.update({f"V.{k}": v for k, v in grads_V.items()})
    return grads


def sum_rate_objective(model: ClModel, rho: np.ndarray, h_hat: np.ndarray, err: np.ndarray,
                       P: float, mode: str = "train") -> tuple[float, dict]:
    """Mini-batch mean sum-rate and its gradient with respect to all parameters.

    The gradient is of the *objective* (ascent direction); the trainer
    negates it to minimise the loss.
    """
    p, cache = _forward_batch(model, rho, h_hat, P, mode)
    G = link_gains(h_hat + err, beam_phase(h_hat))
    a = np.sqrt(p)
    rates, grad_a = rate_and_amplitude_grad(G, a)
    safe = np.where(a > 0.0, a, 1.0)
    grad_p = np.where(a > 0.0, grad_a / (2.0 * safe), 0.0) / rho.shape[0]
    return float(rates.mean()), _backward_batch(model, cache, grad_p)


def batch_allocations(model: ClModel, rho: np.ndarray, h_hat: np.ndarray, P: float,
                      chunk: int = 1024) -> np.ndarray:
    """Inference over many realizations at once, (n, M, K) -> (n, M, K)."""
    out = np.empty(rho.shape)
    for start in range(0, rho.shape[0], chunk):
        stop = start + chunk
        out[start:stop], _ = _forward_batch(model, rho[start:stop], h_hat[start:stop], P, "infer")
    return out


# ────────────────────────────────────────────────────────────────
# Training
# ────────────────────────────────────────────────────────────────

class DeploymentSampler:
    """Fresh AP/UE drops for every training sample."""

    def __init__(self, geometry: GeometryConfig, M: int, K: int):
        self.geometry = geometry
        self.M = M
        self.K = K

    def __call__(self, n: int, rng: np.random.Generator) -> np.ndarray:
        rho, _ = sample_deployments(self.geometry, self.M, self.K, n, rng)
        return rho


@dataclass
class EpochRecord:
    epoch: int
    train_objective: float
    smoothed: float
    validation: float


@dataclass
class TrainingTrace:
    epochs: list = field(default_factory=list)

    def smoothed(self) -> list[float]:
        return [r.smoothed for r in self.epochs]

    def validation(self) -> list[float]:
        return [r.validation for r in self.epochs]


def evaluate_objective(model: ClModel, rho, h_hat, err, P: float) -> float:
    p = batch_allocations(model, rho, h_hat, P)
    G = link_gains(h_hat + err, beam_phase(h_hat))
    rates = rates_from_gains(G, np.sqrt(p)).sum(axis=-1)
    return float(rates.mean())


def train_cl(
    config: ClConfig,
    sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]],
    rng: np.random.Generator | int,
    model: Optional[ClModel] = None,
) -> tuple[ClModel, TrainingTrace]:
    """Maximise the mini-batch mean sum-rate with Adam on its negative.

    *rng* may be a master seed (substreams ``init`` / ``training``) or a
    generator that then drives everything.
    """
    if isinstance(rng, (int, np.integer)):
        init_rng, train_rng = make_stream(rng, "init"), make_stream(rng, "training")
        val_rng = make_stream(rng, "training", 1)
    else:
        init_rng = train_rng = rng
        val_rng = np.random.default_rng(np.random.SeedSequence(int(rng.integers(2 ** 63))))
    sampler = sampler or DeploymentSampler(config.geometry, config.M_train, config.K)
    model = model or ClModel.initialize(config, init_rng)
    P = config.P

    n_val = config.validation_samples
    if n_val > 0:
        val_rho = sampler(n_val, val_rng)
        val_h, val_e = sample_channels(val_rho, config.phi_sampling.sample(n_val, val_rng), val_rng)

    adam = AdamState(learning_rate=config.learning_rate)
    trace = TrainingTrace()
    smoothed = math.nan
    for epoch in range(1, config.epochs + 1):
        objectives = []
        for _ in range(config.steps_per_epoch):
            rho = sampler(config.batch_size, train_rng)
            phi = config.phi_sampling.sample(config.batch_size, train_rng)
            h_hat, err = sample_channels(rho, phi, train_rng)
            objective, grads = sum_rate_objective(model, rho, h_hat, err, P, mode="train")
            if not math.isfinite(objective):
                raise DivergenceError(epoch, -objective)
            loss_grads = {name: -g for name, g in grads.items()}
            adam_update(adam, model.parameters(), loss_grads)
            objectives.append(objective)

        mean_obj = float(np.mean(objectives))
        smoothed = mean_obj if math.isnan(smoothed) else \
            constants.SMOOTHING * smoothed + (1.0 - constants.SMOOTHING) * mean_obj
        validation = evaluate_objective(model, val_rho, val_h, val_e, P) if n_val > 0 else math.nan
        trace.epochs.append(EpochRecord(epoch, mean_obj, smoothed, validation))
        log_event("training", f"{config.method} epoch {epoch}/{config.epochs}: "
                              f"train={mean_obj:.4f} smoothed={smoothed:.4f} val={validation:.4f}")

    model.tags.update(method=config.method, M_train=config.M_train,
                      phi_policy=str(config.phi_sampling))
    if isinstance(rng, (int, np.integer)):
        model.tags["seed"] = int(rng)
    return model, trace
