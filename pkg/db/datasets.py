"""
On-disk channel test sets.

A dataset is a directory:

  manifest.json   format, version, n, M, K, phi, seed, per-file sha256
  rho.f64         n*M*K little-endian float64, row-major (n, M, K)
  h_hat.f64       n*M*K*2 little-endian float64, interleaved (re, im)
  err.f64         same layout as h_hat.f64
"""
from __future__ import annotations

import hashlib
import json
import os
import pathlib
from dataclasses import dataclass

import numpy as np

from utils.errors import ConfigError, StoreError

FORMAT = "cfpl-dataset"
VERSION = 1
FILES = ("rho.f64", "h_hat.f64", "err.f64")


@dataclass
class ChannelSet:
    """n channel realizations sharing one (M, K) shape and one phi."""

    rho: np.ndarray      # (n, M, K)
    h_hat: np.ndarray    # (n, M, K) complex
    err: np.ndarray      # (n, M, K) complex
    phi: float
    seed: int

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def M(self) -> int:
        return self.rho.shape[1]

    @property
    def K(self) -> int:
        return self.rho.shape[2]

    def head(self, n: int) -> "ChannelSet":
        """First *n* realizations (a paired subset)."""
        return ChannelSet(self.rho[:n], self.h_hat[:n], self.err[:n], self.phi, self.seed)


def _complex_bytes(z: np.ndarray) -> bytes:
    pairs = np.stack([z.real, z.imag], axis=-1)
    return np.ascontiguousarray(pairs, dtype="<f8").tobytes()


def _complex_from(raw: bytes, shape: tuple) -> np.ndarray:
    pairs = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return pairs.view(np.complex128).reshape(shape)


class Datasets:
    """Reads and writes test sets under a directory."""

    # ------------------------------------------------------------------
    # Write
    # ------------------------------------------------------------------

    @classmethod
    def write(cls, directory: str | os.PathLike, data: ChannelSet) -> dict:
        """Persist *data* and return its manifest."""
        directory = pathlib.Path(directory)
        blobs = {
            "rho.f64": np.ascontiguousarray(data.rho, dtype="<f8").tobytes(),
            "h_hat.f64": _complex_bytes(data.h_hat),
            "err.f64": _complex_bytes(data.err),
        }
        manifest = {
            "format": FORMAT,
            "version": VERSION,
            "n": data.n,
            "M": data.M,
            "K": data.K,
            "phi": float(data.phi),
            "seed": int(data.seed),
            "sha256": {name: hashlib.sha256(blob).hexdigest() for name, blob in blobs.items()},
        }
        try:
            os.makedirs(directory, exist_ok=True)
            for name, blob in blobs.items():
                (directory / name).write_bytes(blob)
            (directory / "manifest.json").write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            raise StoreError(str(directory), e) from e
        return manifest

    # ------------------------------------------------------------------
    # Read
    # ------------------------------------------------------------------

    @classmethod
    def manifest(cls, directory: str | os.PathLike) -> dict:
        path = pathlib.Path(directory) / "manifest.json"
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise StoreError(str(path), e) from e
        if manifest.get("format") != FORMAT:
            raise StoreError(str(path), f"not a dataset manifest (format={manifest.get('format')!r})")
        if manifest.get("version") != VERSION:
            raise StoreError(str(path), f"unsupported dataset version {manifest.get('version')}")
        return manifest

    @classmethod
    def read(cls, directory: str | os.PathLike, verify: bool = True) -> ChannelSet:
        directory = pathlib.Path(directory)
        manifest = cls.manifest(directory)
        blobs = {}
        for name in FILES:
            try:
                blobs[name] = (directory / name).read_bytes()
            except OSError as e:
                raise StoreError(str(directory / name), e) from e
            if verify and hashlib.sha256(blobs[name]).hexdigest() != manifest["sha256"][name]:
                raise StoreError(str(directory / name), "content does not match manifest hash")

        shape = (manifest["n"], manifest["M"], manifest["K"])
        expected = int(np.prod(shape)) * 8
        if len(blobs["rho.f64"]) != expected:
            raise StoreError(str(directory / "rho.f64"), f"expected {expected} bytes")
        rho = np.frombuffer(blobs["rho.f64"], dtype="<f8").reshape(shape).astype(np.float64)
        return ChannelSet(
            rho,
            _complex_from(blobs["h_hat.f64"], shape),
            _complex_from(blobs["err.f64"], shape),
            float(manifest["phi"]),
            int(manifest["seed"]),
        )

    @classmethod
    def read_matching(cls, directory, M: int, K: int, n: int) -> ChannelSet:
        """Read a dataset and check it fits an experiment's dimensions."""
        data = cls.read(directory)
        if (data.M, data.K) != (M, K):
            raise ConfigError("dataset", f"{directory} holds M={data.M}, K={data.K}; "
                                         f"experiment needs M={M}, K={K}")
        if data.n < n:
            raise ConfigError("dataset", f"{directory} holds {data.n} samples; need {n}")
        return data.head(n)
