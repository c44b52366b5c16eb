"""
Artefact stores and logging — Test Suite.

Proves:
 Group 1 — Datasets
   1.  Read-back is bit-identical; manifest hashes match the files
   2.  Two seeds give distinct datasets
   3.  Tampered content, missing directories and mismatched dims are reported

 Group 2 — Checkpoints
   4.  Save → load reproduces the forward pass exactly and keeps the tags
   5.  JSON mirror carries the header and the values
   6.  Missing file → CheckpointNotFound; foreign file → StoreError

 Group 3 — Results and logs
   7.  CSV floats use repr, numpy scalars included; sidecar carries a timestamp
   8.  Log channels append timestamped lines; unknown types are rejected
"""
import hashlib
import json

import numpy as np
import pytest

from core.coplearn import ClConfig, ClModel, PhiPolicy, forward_pass
from core.harness import draw_channel_set
from db.checkpoints import Checkpoints
from db.datasets import Datasets
from db.results import Results
from utils.errors import CheckpointNotFound, ConfigError, StoreError
from utils.logger import get_all_log_channels, get_log_channel, log_event, set_log_channel


# ────────────────────────────────────────────────────────────────
# Group 1 — Datasets
# ────────────────────────────────────────────────────────────────

def test_dataset_round_trip(tmp_path):
    data = draw_channel_set(7, 3, 2, 20, 0.2)
    manifest = Datasets.write(tmp_path / "ds", data)
    back = Datasets.read(tmp_path / "ds")
    assert back.rho.tobytes() == data.rho.tobytes()
    assert back.h_hat.tobytes() == data.h_hat.tobytes()
    assert back.err.tobytes() == data.err.tobytes()
    assert (back.phi, back.seed) == (0.2, 7)
    for name, digest in manifest["sha256"].items():
        assert hashlib.sha256((tmp_path / "ds" / name).read_bytes()).hexdigest() == digest
    assert (manifest["n"], manifest["M"], manifest["K"]) == (20, 3, 2)


def test_distinct_seeds():
    a = draw_channel_set(1, 2, 2, 5, 0.1)
    b = draw_channel_set(2, 2, 2, 5, 0.1)
    assert not np.array_equal(a.rho, b.rho)


def test_dataset_errors(tmp_path):
    Datasets.write(tmp_path / "ds", draw_channel_set(7, 3, 2, 4, 0.0))
    with pytest.raises(ConfigError):
        Datasets.read_matching(tmp_path / "ds", 4, 2, 4)
    with pytest.raises(ConfigError):
        Datasets.read_matching(tmp_path / "ds", 3, 2, 10)
    assert Datasets.read_matching(tmp_path / "ds", 3, 2, 2).n == 2

    blob = bytearray((tmp_path / "ds" / "err.f64").read_bytes())
    blob[0] ^= 0xFF
    (tmp_path / "ds" / "err.f64").write_bytes(bytes(blob))
    with pytest.raises(StoreError):
        Datasets.read(tmp_path / "ds")
    with pytest.raises(StoreError):
        Datasets.read(tmp_path / "missing")


# ────────────────────────────────────────────────────────────────
# Group 2 — Checkpoints
# ────────────────────────────────────────────────────────────────

def _model(method="CL"):
    config = ClConfig(K=2, method=method, hidden_depth=2, hidden_width=8, M_train=3, P=50.0,
                      phi_sampling=PhiPolicy.parse("fixed:0.2"))
    model = ClModel.initialize(config, np.random.default_rng(4))
    rng = np.random.default_rng(5)
    for net in model.networks().values():
        for bn in net.norms:
            bn.running_mean = rng.standard_normal(bn.running_mean.shape)
            bn.running_var = rng.random(bn.running_var.shape) + 0.5
    model.tags.update(method=method, M_train=3, phi_policy="fixed:0.2", seed=11)
    return model


@pytest.mark.parametrize("method", ["CL", "NCL", "SCL"])
def test_checkpoint_round_trip(tmp_path, method):
    model = _model(method)
    path = Checkpoints.save(tmp_path / "m.ckpt", model)
    back = Checkpoints.load(path)
    data = draw_channel_set(3, 5, 2, 1, 0.1)
    np.testing.assert_array_equal(forward_pass(back, data.rho[0], data.h_hat[0], 50.0).p,
                                  forward_pass(model, data.rho[0], data.h_hat[0], 50.0).p)
    assert back.tags == model.tags
    assert back.config == model.config
    assert back.n_params() == model.n_params()


def test_checkpoint_mirror(tmp_path):
    model = _model()
    path = Checkpoints.save(tmp_path / "m.ckpt", model)
    mirror = json.loads(Checkpoints.mirror_path(path).read_text())
    assert mirror["version"] == 1
    assert mirror["config"]["phi_sampling"] == "fixed:0.2"
    assert mirror["networks"]["V"]["sizes"] == model.theta_V.sizes
    np.testing.assert_array_equal(mirror["values"]["D.out.bias"], model.theta_D.output.bias)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointNotFound) as info:
        Checkpoints.load(tmp_path / "nope.ckpt", "CL")
    assert "nope.ckpt" in str(info.value)
    (tmp_path / "junk.ckpt").write_bytes(b"not a checkpoint at all")
    with pytest.raises(StoreError):
        Checkpoints.load(tmp_path / "junk.ckpt")


def test_checkpoint_naming(tmp_path):
    path = Checkpoints.path_for(tmp_path, "CL", 4, 8, "fixed:0.1", 20.0)
    assert path.name == "CL_K4_M8_fixed-0.1_20dB.ckpt"


# ────────────────────────────────────────────────────────────────
# Group 3 — Results and logs
# ────────────────────────────────────────────────────────────────

def test_results_csv_and_sidecar(tmp_path):
    rows = [{"method": "CL", "rate": np.float64(0.1), "n": 3},
            {"method": "EQUAL", "rate": 1.0 / 3.0, "n": 3}]
    path = Results.write_csv(tmp_path / "out" / "r.csv", rows)
    text = path.read_text()
    assert text.splitlines() == ["method,rate,n", "CL,0.1,3", f"EQUAL,{1.0 / 3.0!r},3"]
    assert Results.read_csv(path)[1]["rate"] == repr(1.0 / 3.0)

    Results.write_sidecar(path, {"seed": 1})
    side = Results.read_sidecar(path)
    assert side["seed"] == 1 and side["csv"] == "r.csv" and "written_at" in side


def test_log_channels(tmp_path):
    target = tmp_path / "logs" / "runs.log"
    set_log_channel("runs", target)
    assert get_log_channel("runs") == target
    log_event("runs", "hello", ok=True)
    log_event("runs", "again")
    lines = target.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert "[runs]" in lines[0] and lines[0].endswith("✅ hello")
    assert get_all_log_channels()["training"] is None
    with pytest.raises(ValueError):
        log_event("nope", "x")
