"""
Minimal dense-network engine: fully-connected layers, ReLU / ReLU6,
batch normalization, exact reverse-mode gradients and Adam.

All activations are 2-D float64 arrays of shape (batch, features); a
forward call returns the output together with the cache its backward call
needs.  Hidden blocks run dense -> ReLU -> batch-norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils import constants
from utils.errors import ConfigError, ShapeError

MODES = ("train", "infer")


def check_2d(x: np.ndarray, what: str, cols: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(what, "2-D (batch, features) array", x.shape)
    if cols is not None and x.shape[1] != cols:
        raise ShapeError(f"{what} columns", cols, x.shape[1])
    return x


# ────────────────────────────────────────────────────────────────
# Parameter records
# ────────────────────────────────────────────────────────────────

@dataclass
class DenseParams:
    weight: np.ndarray   # (out, in)
    bias: np.ndarray     # (out,)

    @classmethod
    def he_init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseParams":
        scale = np.sqrt(2.0 / max(n_in, 1))
        return cls(rng.standard_normal((n_out, n_in)) * scale, np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = constants.BN_MOMENTUM
    epsilon: float = constants.BN_EPSILON

    @classmethod
    def fresh(cls, width: int, momentum: float = constants.BN_MOMENTUM,
              epsilon: float = constants.BN_EPSILON) -> "BatchNormParams":
        if epsilon <= 0:
            raise ConfigError("epsilon", "batch-norm epsilon must be > 0")
        return cls(np.ones(width), np.zeros(width), np.zeros(width), np.ones(width),
                   momentum, epsilon)


@dataclass
class AdamState:
    learning_rate: float = constants.LEARNING_RATE
    beta1: float = constants.ADAM_BETA1
    beta2: float = constants.ADAM_BETA2
    epsilon: float = constants.ADAM_EPSILON
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


# ────────────────────────────────────────────────────────────────
# Layers
# ────────────────────────────────────────────────────────────────

def dense_forward(params: DenseParams, x: np.ndarray) -> np.ndarray:
    x = check_2d(x, "dense input", params.n_in)
    return x @ params.weight.T + params.bias


def dense_backward(params: DenseParams, x: np.ndarray, grad_y: np.ndarray):
    """Returns (grad_x, grad_weight, grad_bias)."""
    grad_y = check_2d(grad_y, "dense output gradient", params.n_out)
    return grad_y @ params.weight, grad_y.T @ x, grad_y.sum(axis=0)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return grad_y * (x > 0.0)


def relu6_forward(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, 0.0), 6.0)


def relu6_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return grad_y * ((x > 0.0) & (x < 6.0))


def softplus_forward(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return grad_y * (0.5 * (1.0 + np.tanh(0.5 * x)))


@dataclass
class BatchNormCache:
    mode: str
    x_hat: np.ndarray
    inv_std: np.ndarray


def batchnorm_forward(params: BatchNormParams, x: np.ndarray, mode: str = "train"):
    """Returns (y, cache); train mode also moves the running statistics."""
    if mode not in MODES:
        raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")
    x = check_2d(x, "batch-norm input", params.gamma.shape[0])

    if mode == "train":
        if x.shape[0] < 2:
            raise ConfigError("batch", "train-mode batch norm needs at least 2 rows")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        m = params.momentum
        params.running_mean = m * params.running_mean + (1.0 - m) * mean
        params.running_var = m * params.running_var + (1.0 - m) * var
    else:
        mean, var = params.running_mean, params.running_var

    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    x_hat = (x - mean) * inv_std
    return params.gamma * x_hat + params.beta, BatchNormCache(mode, x_hat, inv_std)


def batchnorm_backward(params: BatchNormParams, cache: BatchNormCache, grad_y: np.ndarray):
    """Returns (grad_x, grad_gamma, grad_beta)."""
    grad_gamma = (grad_y * cache.x_hat).sum(axis=0)
    grad_beta = grad_y.sum(axis=0)
    g_hat = grad_y * params.gamma
    if cache.mode == "infer":
        return g_hat * cache.inv_std, grad_gamma, grad_beta
    n = grad_y.shape[0]
    grad_x = cache.inv_std / n * (
        n * g_hat - g_hat.sum(axis=0) - cache.x_hat * (g_hat * cache.x_hat).sum(axis=0)
    )
    return grad_x, grad_gamma, grad_beta


# ────────────────────────────────────────────────────────────────
# Optimizer
# ────────────────────────────────────────────────────────────────

def adam_update(state: AdamState, params: dict, grads: dict) -> tuple[dict, AdamState]:
    """Bias-corrected Adam descent step, applied in place to *params*."""
    state.step_count += 1
    t = state.step_count
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ShapeError(f"gradient {name}", value.shape, g.shape)
        m = state.first_moment.get(name, np.zeros_like(value))
        v = state.second_moment.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


# ────────────────────────────────────────────────────────────────
# Multi-layer perceptron
# ────────────────────────────────────────────────────────────────

class Mlp:
    """Stack of [dense -> ReLU -> batch-norm] blocks and a linear output layer."""

    def __init__(self, n_in: int, hidden: list[int], n_out: int, rng: np.random.Generator):
        if n_in < 1 or n_out < 1:
            raise ConfigError("layer sizes", f"need n_in, n_out >= 1, got {n_in}, {n_out}")
        sizes = [n_in] + list(hidden)
        self.dense = [DenseParams.he_init(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.norms = [BatchNormParams.fresh(w) for w in hidden]
        self.output = DenseParams.he_init(sizes[-1], n_out, rng)

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [d.n_out for d in self.dense] + [self.n_out]

    @property
    def activations(self) -> list[str]:
        return ["relu+batchnorm"] * len(self.dense) + ["linear"]

    @property
    def n_in(self) -> int:
        return self.dense[0].n_in if self.dense else self.output.n_in

    @property
    def n_out(self) -> int:
        return self.output.n_out

    def parameters(self) -> dict:
        """Trainable arrays by name (live references)."""
        out = {}
        for j, (d, bn) in enumerate(zip(self.dense, self.norms)):
            out[f"{j}.weight"] = d.weight
            out[f"{j}.bias"] = d.bias
            out[f"{j}.gamma"] = bn.gamma
            out[f"{j}.beta"] = bn.beta
        out["out.weight"] = self.output.weight
        out["out.bias"] = self.output.bias
        return out

    def buffers(self) -> dict:
        """Batch-norm running statistics by name."""
        out = {}
        for j, bn in enumerate(self.norms):
            out[f"{j}.running_mean"] = bn.running_mean
            out[f"{j}.running_var"] = bn.running_var
        return out

    def load_state(self, arrays: dict) -> None:
        for j, (d, bn) in enumerate(zip(self.dense, self.norms)):
            d.weight[...] = arrays[f"{j}.weight"]
            d.bias[...] = arrays[f"{j}.bias"]
            bn.gamma[...] = arrays[f"{j}.gamma"]
            bn.beta[...] = arrays[f"{j}.beta"]
            bn.running_mean = np.array(arrays[f"{j}.running_mean"], dtype=np.float64)
            bn.running_var = np.array(arrays[f"{j}.running_var"], dtype=np.float64)
        self.output.weight[...] = arrays["out.weight"]
        self.output.bias[...] = arrays["out.bias"]

    def n_params(self) -> int:
        return sum(v.size for v in self.parameters().values())

    def forward(self, x: np.ndarray, mode: str = "infer"):
        """Returns (y, caches)."""
        caches = []
        h = check_2d(x, "network input", self.n_in)
        for d, bn in zip(self.dense, self.norms):
            z = dense_forward(d, h)
            r = relu_forward(z)
            y, bn_cache = batchnorm_forward(bn, r, mode)
            caches.append((h, z, bn_cache))
            h = y
        caches.append(h)
        return dense_forward(self.output, h), caches

    def backward(self, caches: list, grad_y: np.ndarray) -> tuple[np.ndarray, dict]:
        """Returns (grad_x, grads keyed like parameters())."""
        grads = {}
        h_last = caches[-1]
        grad, grads["out.weight"], grads["out.bias"] = dense_backward(self.output, h_last, grad_y)
        for j in range(len(self.dense) - 1, -1, -1):
            h, z, bn_cache = caches[j]
            grad, grads[f"{j}.gamma"], grads[f"{j}.beta"] = batchnorm_backward(
                self.norms[j], bn_cache, grad)
            grad = relu_backward(z, grad)
            grad, grads[f"{j}.weight"], grads[f"{j}.bias"] = dense_backward(self.dense[j], h, grad)
        return grad, grads
