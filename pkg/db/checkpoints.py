"""
Trained-model checkpoints.

Binary layout (all integers little-endian):

  offset 0   8 bytes   magic  b"CFPLCKPT"
  offset 8   uint32    format version
  offset 12  uint32    header length H in bytes
  offset 16  H bytes   UTF-8 JSON header
  16 + H     ...       float64 (little-endian) arrays, back to back

The header holds the ClConfig, the model tags (method, M_train, phi policy,
seed), each network's layer sizes and activation tags, and an array table
of (name, shape, offset, count) with offsets counted in float64 elements
from the start of the array block.  A JSON mirror with the same header and
the arrays as nested lists is written next to the binary file.
"""
from __future__ import annotations

import dataclasses
import json
import os
import pathlib
import struct

import numpy as np

from core.coplearn import ClConfig, ClModel, PhiPolicy
from core.netenv import GeometryConfig
from utils.errors import CheckpointNotFound, StoreError

MAGIC = b"CFPLCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def config_to_dict(config: ClConfig) -> dict:
    data = dataclasses.asdict(config)
    data["phi_sampling"] = str(config.phi_sampling)
    return data


def config_from_dict(data: dict) -> ClConfig:
    data = dict(data)
    data["phi_sampling"] = PhiPolicy.parse(data["phi_sampling"])
    data["geometry"] = GeometryConfig(**data["geometry"])
    return ClConfig(**data)


def _model_arrays(model: ClModel) -> dict:
    arrays = {}
    for name, net in model.networks().items():
        for key, arr in {**net.parameters(), **net.buffers()}.items():
            arrays[f"{name}.{key}"] = arr
    return arrays


class Checkpoints:
    """Save / load ClModels in the versioned container."""

    # ------------------------------------------------------------------
    # Paths
    # ------------------------------------------------------------------

    @classmethod
    def path_for(cls, directory, method: str, K: int, M_train: int,
                 phi_policy: str = "uniform", snr_db: float = 20.0) -> pathlib.Path:
        slug = str(PhiPolicy.parse(phi_policy)).replace(":", "-")
        return pathlib.Path(directory) / f"{method}_K{K}_M{M_train}_{slug}_{snr_db:g}dB.ckpt"

    @classmethod
    def mirror_path(cls, path) -> pathlib.Path:
        return pathlib.Path(path).with_suffix(".json")

    # ------------------------------------------------------------------
    # Save
    # ------------------------------------------------------------------

    @classmethod
    def save(cls, path, model: ClModel) -> pathlib.Path:
        path = pathlib.Path(path)
        arrays = _model_arrays(model)
        table, offset = [], 0
        for name, arr in arrays.items():
            table.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": arr.size})
            offset += arr.size

        header = {
            "config": config_to_dict(model.config),
            "tags": model.tags,
            "networks": {name: {"sizes": net.sizes, "activations": net.activations}
                         for name, net in model.networks().items()},
            "n_params": model.n_params(),
            "arrays": table,
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())

        mirror = dict(header, version=VERSION,
                      values={name: arr.tolist() for name, arr in arrays.items()})
        try:
            os.makedirs(path.parent, exist_ok=True)
            with open(path, "wb") as f:
                f.write(_PREFIX.pack(MAGIC, VERSION, len(header_bytes)))
                f.write(header_bytes)
                f.write(body)
            cls.mirror_path(path).write_text(json.dumps(mirror, sort_keys=True), encoding="utf-8")
        except OSError as e:
            raise StoreError(str(path), e) from e
        return path

    # ------------------------------------------------------------------
    # Load
    # ------------------------------------------------------------------

    @classmethod
    def read_header(cls, path) -> tuple[dict, bytes]:
        path = pathlib.Path(path)
        if not path.exists():
            raise CheckpointNotFound(str(path))
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise StoreError(str(path), e) from e
        if len(raw) < _PREFIX.size:
            raise StoreError(str(path), "truncated checkpoint")
        magic, version, header_len = _PREFIX.unpack_from(raw)
        if magic != MAGIC:
            raise StoreError(str(path), "not a checkpoint file")
        if version != VERSION:
            raise StoreError(str(path), f"unsupported checkpoint version {version}")
        start = _PREFIX.size
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
        return header, raw[start + header_len:]

    @classmethod
    def load(cls, path, method: str | None = None) -> ClModel:
        path = pathlib.Path(path)
        if not path.exists():
            raise CheckpointNotFound(str(path), method)
        header, body = cls.read_header(path)
        values = np.frombuffer(body, dtype="<f8")

        config = config_from_dict(header["config"])
        model = ClModel.initialize(config, np.random.default_rng(0))
        model.tags = dict(header.get("tags", {}))

        per_net: dict[str, dict] = {}
        for entry in header["arrays"]:
            stop = entry["offset"] + entry["count"]
            if stop > values.size:
                raise StoreError(str(path), f"array {entry['name']} runs past end of file")
            net, key = entry["name"].split(".", 1)
            per_net.setdefault(net, {})[key] = \
                values[entry["offset"]:stop].reshape(entry["shape"]).astype(np.float64)

        for name, net in model.networks().items():
            if header["networks"][name]["sizes"] != net.sizes:
                raise StoreError(str(path), f"network {name} sizes do not match its config")
            net.load_state(per_net[name])
        return model
