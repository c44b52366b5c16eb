"""
Network environment: AP/UE drops, long-term path-loss and short-term
channel realizations with additive estimation error.

    h = h_hat + e,   h_hat ~ CN(0, (1-phi) rho),   e ~ CN(0, phi rho)

Arrays are indexed [AP i, UE k] throughout (rho[i, k] is the path-loss of
the link between AP i and UE k).  Batched helpers put the sample index
first: (n, M, K).
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils import constants
from utils.errors import ConfigError, ShapeError

# Named substreams fanned out from one master seed.
STREAMS = ("deployment", "channel", "error", "training", "test", "csgd", "init")


def make_stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Return the generator for substream *name* (optionally indexed) of *seed*."""
    if name not in STREAMS:
        raise ConfigError("stream", f"unknown substream {name!r}")
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    words.extend(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(words))


# ────────────────────────────────────────────────────────────────
# Domain types
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GeometryConfig:
    radius: float = constants.RADIUS
    P0: float = constants.P0
    q0: float = constants.Q0
    eta: float = constants.ETA
    min_distance: float = constants.MIN_DISTANCE

    def __post_init__(self):
        for name in ("radius", "P0", "q0", "eta", "min_distance"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class NetworkConfig:
    M: int
    K: int
    P: float
    phi: float

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("M", f"need at least one AP, got {self.M}")
        if self.K < 1:
            raise ConfigError("K", f"need at least one UE, got {self.K}")
        if not self.P > 0:
            raise ConfigError("P", f"power budget must be > 0, got {self.P}")
        check_phi(self.phi)

    @classmethod
    def from_snr_db(cls, M: int, K: int, snr_db: float, phi: float) -> "NetworkConfig":
        return cls(M=M, K=K, P=snr_to_power(snr_db), phi=phi)

    @property
    def snr_db(self) -> float:
        return power_to_snr(self.P)


@dataclass
class Deployment:
    """AP and UE positions in meters, kept only for reproducibility audits."""

    ap_xy: np.ndarray
    ue_xy: np.ndarray


@dataclass
class LongTermCsi:
    rho: np.ndarray
    positions: Optional[Deployment] = field(default=None, repr=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if self.rho.ndim != 2:
            raise ShapeError("rho", "M x K matrix", self.rho.shape)
        if not np.all(self.rho > 0):
            raise ConfigError("rho", "long-term CSI entries must be > 0")

    @property
    def M(self) -> int:
        return self.rho.shape[0]

    @property
    def K(self) -> int:
        return self.rho.shape[1]

    def to_dict(self) -> dict:
        return {"M": self.M, "K": self.K, "rho": self.rho.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LongTermCsi":
        rho = np.asarray(data["rho"], dtype=np.float64).reshape(data["M"], data["K"])
        return cls(rho)


@dataclass
class ChannelRealization:
    h_hat: np.ndarray
    err: np.ndarray
    rho: LongTermCsi
    phi: float

    def __post_init__(self):
        shape = self.rho.rho.shape
        for name in ("h_hat", "err"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            if arr.shape != shape:
                raise ShapeError(name, shape, arr.shape)
            setattr(self, name, arr)

    @property
    def M(self) -> int:
        return self.rho.M

    @property
    def K(self) -> int:
        return self.rho.K

    def actual(self) -> np.ndarray:
        return reconstruct_actual(self)

    def to_dict(self) -> dict:
        data = self.rho.to_dict()
        data.update(
            phi=self.phi,
            h_hat_re=self.h_hat.real.ravel().tolist(),
            h_hat_im=self.h_hat.imag.ravel().tolist(),
            err_re=self.err.real.ravel().tolist(),
            err_im=self.err.imag.ravel().tolist(),
        )
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelRealization":
        shape = (data["M"], data["K"])

        def _complex(prefix: str) -> np.ndarray:
            re = np.asarray(data[f"{prefix}_re"], dtype=np.float64)
            im = np.asarray(data[f"{prefix}_im"], dtype=np.float64)
            return (re + 1j * im).reshape(shape)

        return cls(_complex("h_hat"), _complex("err"), LongTermCsi.from_dict(data), float(data["phi"]))


# ────────────────────────────────────────────────────────────────
# Helpers
# ────────────────────────────────────────────────────────────────

def check_phi(phi: float) -> float:
    if not 0.0 <= phi <= 1.0:
        raise ConfigError("phi", f"error ratio must lie in [0, 1], got {phi}")
    return float(phi)


def snr_to_power(snr_db: float) -> float:
    """Noise power is 1, so the per-AP budget P equals the SNR."""
    return float(10.0 ** (snr_db / 10.0))


def power_to_snr(P: float) -> float:
    return float(10.0 * np.log10(P))


def path_loss(distance: np.ndarray, geometry: GeometryConfig) -> np.ndarray:
    """rho = P0 * (q / q0)^(-eta), with q floored at geometry.min_distance."""
    q = np.maximum(np.asarray(distance, dtype=np.float64), geometry.min_distance)
    return geometry.P0 * (q / geometry.q0) ** (-geometry.eta)


def sample_disk(radius: float, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on a disk; returns shape + (2,)."""
    r = radius * np.sqrt(rng.random(shape))
    theta = 2.0 * np.pi * rng.random(shape)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def complex_gaussian(variance: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric CN(0, variance), elementwise."""
    variance = np.asarray(variance, dtype=np.float64)
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(variance.shape)
    im = rng.standard_normal(variance.shape)
    return scale * re + 1j * (scale * im)


# ────────────────────────────────────────────────────────────────
# Operations
# ────────────────────────────────────────────────────────────────

def sample_deployments(
    geometry: GeometryConfig,
    M: int,
    K: int,
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, Deployment]:
    """Draw *n* independent drops; returns rho (n, M, K) and the positions."""
    if M < 1 or K < 1:
        raise ConfigError("M/K", f"need M, K >= 1, got M={M}, K={K}")
    ap = sample_disk(geometry.radius, (n, M), rng)
    ue = sample_disk(geometry.radius, (n, K), rng)
    dist = np.linalg.norm(ap[:, :, None, :] - ue[:, None, :, :], axis=-1)
    return path_loss(dist, geometry), Deployment(ap, ue)


def sample_deployment(
    geometry: GeometryConfig,
    M: int,
    K: int,
    rng: np.random.Generator,
    keep_positions: bool = False,
) -> LongTermCsi:
    rho, where = sample_deployments(geometry, M, K, 1, rng)
    positions = Deployment(where.ap_xy[0], where.ue_xy[0]) if keep_positions else None
    return LongTermCsi(rho[0], positions)


def sample_channels(
    rho: np.ndarray,
    phi: np.ndarray | float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched draw of (h_hat, err) for rho of shape (..., M, K).

    *phi* is a scalar or broadcasts against the leading sample axes.
    """
    rho = np.asarray(rho, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(phi < 0) or np.any(phi > 1):
        raise ConfigError("phi", "error ratio must lie in [0, 1]")
    phi = phi.reshape(phi.shape + (1,) * (rho.ndim - phi.ndim))
    h_hat = complex_gaussian((1.0 - phi) * rho, rng)
    err = complex_gaussian(phi * rho, rng)
    return h_hat, err


def sample_channel(rho: LongTermCsi, phi: float, rng: np.random.Generator) -> ChannelRealization:
    phi = check_phi(phi)
    h_hat, err = sample_channels(rho.rho, phi, rng)
    return ChannelRealization(h_hat, err, rho, phi)


def normalize_longterm(rho_i: np.ndarray, P: float) -> np.ndarray:
    """rho'_k = sqrt(P) sqrt(rho_k) / sum_l sqrt(rho_l), along the last axis.

    Accepts a single K-vector or any stack of them (e.g. an M x K matrix).
    """
    rho_i = np.asarray(rho_i, dtype=np.float64)
    if np.any(rho_i < 0):
        raise ConfigError("rho_i", "long-term CSI must be nonnegative")
    root = np.sqrt(rho_i)
    total = root.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ConfigError("rho_i", "cannot normalise an all-zero long-term CSI vector")
    return np.sqrt(P) * root / total


def reconstruct_actual(chan: ChannelRealization) -> np.ndarray:
    return chan.h_hat + chan.err
