"""
Experiment orchestration.

An ExperimentSpec is resolved once (defaults from utils.constants, which
already honour CFPL_* environment variables, then a KEY=VALUE config file,
then command-line overrides), validated, and hashed.  Everything numeric
below is a pure function of that spec:

  - test channels come from named substreams keyed by (M, K) so every
    method at every sweep point sees the same realizations;
  - the standard normals behind the channels do not depend on phi, so a
    phi = 0 row reproduces an SNR-sweep row at the same configuration;
  - CSGD runs on the first csgd_test_samples realizations (a paired
    subset) with one substream per realization.

Sweep points run concurrently in worker threads; rows are assembled in
sweep order.
"""
from __future__ import annotations

import asyncio
import dataclasses
import hashlib
import json
import pathlib
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from dotenv import dotenv_values

from core.coplearn import (
    ClConfig,
    ClModel,
    PhiPolicy,
    batch_allocations,
    fronthaul_cost,
    train_cl,
)
from core.csgd import CsgdConfig, run_csgd
from core.netenv import (
    GeometryConfig,
    LongTermCsi,
    check_phi,
    make_stream,
    power_to_snr,
    sample_channels,
    sample_deployments,
    snr_to_power,
)
from core.objective import RateReport, batch_rates, summarize
from db.checkpoints import Checkpoints
from db.datasets import ChannelSet, Datasets
from db.results import Results
from utils import constants
from utils.errors import CheckpointNotFound, ConfigError
from utils.logger import log_event

AXES = ("snr_db", "phi", "m_test")
RATE_COLUMNS = ["config_hash", "M", "K", "P_dB", "phi", "method",
                "mean_sum_rate", "std_error", "n_samples", "seed"]
SWEEP_COLUMNS = ["axis", "value"] + RATE_COLUMNS
SCALABILITY_COLUMNS = ["config_hash", "K", "P_dB", "phi", "M_train", "M_test",
                       "cl_sum_rate", "csgd_sum_rate", "relative", "n_samples", "seed"]
TRAINING_COLUMNS = ["epoch", "train_objective", "smoothed", "validation"]


# ────────────────────────────────────────────────────────────────
# Spec
# ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved experiment configuration.

    List-valued fields double as sweep axes: the field named by ``axis`` is
    swept, every other list contributes its first entry as the fixed value.
    """

    methods: tuple = constants.METHODS
    axis: str = "snr_db"
    snr_db: tuple = (constants.SNR_DB,)
    phi: tuple = (constants.PHI,)
    m_train: tuple = (constants.M_TRAIN,)
    m_test: tuple = ()
    K: int = constants.K
    phi_policy: str = "uniform"
    train_phis: tuple = ()
    n_test_samples: int = constants.TEST_SAMPLES
    csgd_test_samples: int = constants.CSGD_TEST_SAMPLES
    seed: int = constants.SEED
    # training
    epochs: int = constants.EPOCHS
    steps_per_epoch: int = constants.STEPS_PER_EPOCH
    train_batch: int = constants.TRAIN_BATCH
    learning_rate: float = constants.LEARNING_RATE
    hidden_depth: int = constants.HIDDEN_DEPTH
    hidden_width: int = 0
    ratio_activation: str = "softplus"
    h_encoding: str = "raw"
    train_missing: bool = False
    # CSGD
    csgd_iters: int = constants.CSGD_MAX_ITER
    csgd_batch: int = constants.CSGD_BATCH
    csgd_alpha: Optional[float] = None
    step_schedule: str = "normalized"
    csgd_monitor: str = "exact"
    gamma_reading: str = "local"
    # plumbing, not hashed
    dataset: str = ""
    workers: int = constants.WORKERS
    out_dir: str = constants.OUT_DIR
    checkpoint_dir: str = constants.CHECKPOINT_DIR

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("methods", "method set must not be empty")
        for m in self.methods:
            if m not in constants.METHODS:
                raise ConfigError("methods", f"unknown method {m!r} (expected {constants.METHODS})")
        if self.axis not in AXES:
            raise ConfigError("axis", f"expected one of {AXES}, got {self.axis!r}")
        if not self.sweep_values:
            raise ConfigError(self.axis, "sweep axis must not be empty")
        if not self.snr_db or not self.phi or not self.m_train:
            raise ConfigError("spec", "snr_db, phi and m_train need at least one value")
        for v in self.phi + self.train_phis:
            check_phi(v)
        for m in self.m_train + self.m_test:
            if m < 1:
                raise ConfigError("M", f"need at least one AP, got {m}")
        if self.K < 1:
            raise ConfigError("K", f"need at least one UE, got {self.K}")
        if self.n_test_samples < 1:
            raise ConfigError("samples", f"need at least one test sample, got {self.n_test_samples}")
        if self.csgd_test_samples < 1:
            raise ConfigError("csgd_test_samples", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        PhiPolicy.parse(self.phi_policy)
        self.csgd_config()

    @property
    def sweep_values(self) -> tuple:
        return self.m_tests if self.axis == "m_test" else getattr(self, self.axis)

    @property
    def m_tests(self) -> tuple:
        return self.m_test or self.m_train

    @property
    def M(self) -> int:
        """Fixed test network size for SNR / phi sweeps."""
        return self.m_tests[0]

    @property
    def P(self) -> float:
        return snr_to_power(self.snr_db[0])

    def csgd_config(self) -> CsgdConfig:
        return CsgdConfig(alpha=self.csgd_alpha, L=self.csgd_iters, batch_size=self.csgd_batch,
                          step_schedule=self.step_schedule, gamma_reading=self.gamma_reading,
                          monitor=self.csgd_monitor)

    def cl_config(self, method: str, M_train: int, policy: str, P: float) -> ClConfig:
        return ClConfig(
            K=self.K,
            method=method,
            hidden_depth=self.hidden_depth,
            hidden_width=self.hidden_width or None,
            phi_sampling=PhiPolicy.parse(policy),
            epochs=self.epochs,
            steps_per_epoch=self.steps_per_epoch,
            batch_size=self.train_batch,
            learning_rate=self.learning_rate,
            M_train=M_train,
            P=P,
            ratio_activation=self.ratio_activation,
            h_encoding=self.h_encoding,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_UNHASHED = ("dataset", "workers", "out_dir", "checkpoint_dir", "train_missing")


def config_hash(spec: ExperimentSpec) -> str:
    """First 12 hex chars of the SHA-256 of the canonical JSON spec."""
    data = {k: v for k, v in spec.to_dict().items() if k not in _UNHASHED}
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


# -- Parsing -----------------------------------------------------

def _floats(text: str) -> tuple:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _methods(text: str) -> tuple:
    aliases = {"EQUAL-POWER": "EQUAL", "EQUAL_POWER": "EQUAL", "EP": "EQUAL"}
    names = [x.strip().upper() for x in str(text).split(",") if x.strip()]
    return tuple(aliases.get(n, n) for n in names)


def _bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _optional_float(text: str) -> Optional[float]:
    text = str(text).strip().lower()
    return None if text in ("", "auto", "none") else float(text)


# key -> (field, parser); config-file keys and CLI dests share this table
KEYS: dict[str, tuple[str, Callable]] = {
    "methods": ("methods", _methods),
    "method": ("methods", _methods),
    "snr_db": ("snr_db", _floats),
    "phi": ("phi", _floats),
    "m_train": ("m_train", _ints),
    "m_test": ("m_test", _ints),
    "k": ("K", int),
    "phi_policy": ("phi_policy", str),
    "train_phis": ("train_phis", _floats),
    "samples": ("n_test_samples", int),
    "n_test_samples": ("n_test_samples", int),
    "csgd_test_samples": ("csgd_test_samples", int),
    "seed": ("seed", int),
    "epochs": ("epochs", int),
    "steps_per_epoch": ("steps_per_epoch", int),
    "train_batch": ("train_batch", int),
    "learning_rate": ("learning_rate", float),
    "hidden_depth": ("hidden_depth", int),
    "hidden_width": ("hidden_width", int),
    "ratio_activation": ("ratio_activation", str),
    "h_encoding": ("h_encoding", str),
    "train_missing": ("train_missing", _bool),
    "csgd_iters": ("csgd_iters", int),
    "csgd_batch": ("csgd_batch", int),
    "csgd_alpha": ("csgd_alpha", _optional_float),
    "step_schedule": ("step_schedule", str),
    "csgd_monitor": ("csgd_monitor", str),
    "gamma_reading": ("gamma_reading", str),
    "dataset": ("dataset", str),
    "workers": ("workers", int),
    "out": ("out_dir", str),
    "out_dir": ("out_dir", str),
    "checkpoint_dir": ("checkpoint_dir", str),
}


def load_config_file(path: str | pathlib.Path) -> dict:
    """Parse a KEY=VALUE config file into raw strings."""
    path = pathlib.Path(path)
    if not path.is_file():
        raise ConfigError("config", f"config file not found: {path}")
    raw = dotenv_values(path)
    values = {}
    for key, value in raw.items():
        key = key.strip().lower()
        if key not in KEYS:
            raise ConfigError(key, f"unknown key in {path}")
        if value is None:
            raise ConfigError(key, f"missing value in {path}")
        values[key] = value
    return values


def build_spec(axis: str = "snr_db", config_path: Optional[str] = None,
               overrides: Optional[dict] = None) -> ExperimentSpec:
    """defaults < environment < config file < overrides."""
    raw = load_config_file(config_path) if config_path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    fields = {"axis": axis}
    for key, value in raw.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        name, parse = KEYS[key]
        try:
            fields[name] = value if not isinstance(value, str) else parse(value)
        except ValueError as e:
            raise ConfigError(key, f"cannot parse {value!r}: {e}") from e
    for name in ("snr_db", "phi", "train_phis"):
        if name in fields and not isinstance(fields[name], tuple):
            fields[name] = (float(fields[name]),)
    for name in ("m_train", "m_test"):
        if name in fields and not isinstance(fields[name], tuple):
            fields[name] = (int(fields[name]),)
    return ExperimentSpec(**fields)


# ────────────────────────────────────────────────────────────────
# Results
# ────────────────────────────────────────────────────────────────

@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    columns: list = field(default_factory=lambda: list(SWEEP_COLUMNS))
    wall_times: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        return {
            "config_hash": config_hash(self.spec),
            "seed": self.spec.seed,
            "spec": self.spec.to_dict(),
            "csgd": dataclasses.asdict(self.spec.csgd_config()),
            "wall_time_s": self.wall_times,
            **self.extras,
        }

    def write(self, path) -> pathlib.Path:
        path = Results.write_csv(path, self.rows, self.columns)
        Results.write_sidecar(path, self.manifest())
        log_event("runs", f"Wrote {len(self.rows)} rows to {path}", ok=True)
        return path


# ────────────────────────────────────────────────────────────────
# Test channels
# ────────────────────────────────────────────────────────────────

def draw_channel_set(seed: int, M: int, K: int, n: int, phi: float,
                     geometry: Optional[GeometryConfig] = None) -> ChannelSet:
    geometry = geometry or GeometryConfig()
    rho, _ = sample_deployments(geometry, M, K, n, make_stream(seed, "test", M, K))
    h_hat, err = sample_channels(rho, check_phi(phi), make_stream(seed, "channel", M, K))
    return ChannelSet(rho, h_hat, err, phi, seed)


def channel_set_for(spec: ExperimentSpec, M: int, phi: float) -> ChannelSet:
    if spec.dataset:
        data = Datasets.read_matching(spec.dataset, M, spec.K, spec.n_test_samples)
        if data.phi != phi:
            raise ConfigError("dataset", f"{spec.dataset} was drawn at phi={data.phi}, need {phi}")
        return data
    return draw_channel_set(spec.seed, M, spec.K, spec.n_test_samples, phi)


def generate_dataset(spec: ExperimentSpec, directory: Optional[str] = None) -> dict:
    directory = pathlib.Path(directory or pathlib.Path(spec.out_dir) / "dataset")
    data = draw_channel_set(spec.seed, spec.M, spec.K, spec.n_test_samples, spec.phi[0])
    manifest = Datasets.write(directory, data)
    log_event("data", f"Dataset M={data.M} K={data.K} n={data.n} phi={data.phi} -> {directory}", ok=True)
    return manifest


# ────────────────────────────────────────────────────────────────
# Models
# ────────────────────────────────────────────────────────────────

def parse_label(label: str, default_policy: str) -> tuple[str, str]:
    """Method label -> (method, phi policy); e.g. CL-nonrobust -> (CL, fixed:0)."""
    method, _, variant = label.partition("-")
    if not variant:
        return method, default_policy
    if variant == "nonrobust":
        return method, "fixed:0"
    return method, variant


def checkpoint_path(spec: ExperimentSpec, method: str, M_train: int, policy: str,
                    snr_db: float) -> pathlib.Path:
    return Checkpoints.path_for(spec.checkpoint_dir, method, spec.K, M_train, policy, snr_db)


def train_model(spec: ExperimentSpec, method: str, M_train: int, policy: str,
                snr_db: float) -> tuple[ClModel, pathlib.Path]:
    config = spec.cl_config(method, M_train, policy, snr_to_power(snr_db))
    log_event("runs", f"Training {method} (M_train={M_train}, phi {policy}, {snr_db:g} dB)")
    model, trace = train_cl(config, None, spec.seed)
    model.tags["snr_db"] = snr_db
    path = Checkpoints.save(checkpoint_path(spec, method, M_train, policy, snr_db), model)
    rows = [dataclasses.asdict(r) for r in trace.epochs]
    Results.write_csv(path.with_suffix(".training.csv"), rows, TRAINING_COLUMNS)
    log_event("runs", f"Saved {method} checkpoint to {path}", ok=True)
    return model, path


def resolve_model(spec: ExperimentSpec, method: str, M_train: int, policy: str,
                  snr_db: float) -> ClModel:
    path = checkpoint_path(spec, method, M_train, policy, snr_db)
    try:
        return Checkpoints.load(path, method)
    except CheckpointNotFound:
        if not spec.train_missing:
            raise
    return train_model(spec, method, M_train, policy, snr_db)[0]


# ────────────────────────────────────────────────────────────────
# Evaluation
# ────────────────────────────────────────────────────────────────

def csgd_allocations(spec: ExperimentSpec, data: ChannelSet, P: float) -> tuple[np.ndarray, float]:
    """CSGD on every realization of *data*; returns p (n, M, K) and mean iterations."""
    config = spec.csgd_config()
    out = np.empty(data.rho.shape)
    iterations = []
    for n in range(data.n):
        rng = make_stream(spec.seed, "csgd", data.M, data.K, n)
        result = run_csgd(LongTermCsi(data.rho[n]), data.h_hat[n], data.phi, config, rng, P,
                          err=data.err[n])
        out[n] = result.allocation
        iterations.append(result.iterations)
    return out, float(np.mean(iterations))


def label_rates(spec: ExperimentSpec, label: str, model: Optional[ClModel],
                data: ChannelSet, P: float) -> tuple[np.ndarray, dict]:
    """Per-sample, per-UE rates of one method on *data* and its fronthaul cost.

    CSGD only runs on the first csgd_test_samples realizations.
    """
    method = label.split("-", 1)[0]
    if method == "CSGD":
        data = data.head(min(spec.csgd_test_samples, data.n))
        p, iters = csgd_allocations(spec, data, P)
        per_ap = iters * data.M * data.K
        cost = {"per_ap": per_ap, "total": per_ap * data.M, "iterations": iters}
    elif method == "EQUAL":
        p = np.full(data.rho.shape, P / data.K)
        cost = {"total": 0}
    else:
        p = batch_allocations(model, data.rho, data.h_hat, P)
        cost = fronthaul_cost(model, data.M)
    return batch_rates(data.h_hat + data.err, data.h_hat, p), cost


def evaluate_label(spec: ExperimentSpec, label: str, model: Optional[ClModel],
                   data: ChannelSet, P: float) -> tuple[RateReport, dict]:
    """Sum-rate of one method on *data*; returns the report and its fronthaul cost."""
    rates, cost = label_rates(spec, label, model, data, P)
    return summarize(rates), cost


async def _gather(points: list, fn: Callable, workers: int) -> list:
    limit = asyncio.Semaphore(workers)

    async def one(point):
        async with limit:
            return await asyncio.to_thread(fn, point)

    return await asyncio.gather(*(one(p) for p in points))


def run_points(points: list, fn: Callable, workers: int = 1) -> list:
    """fn over every point, at most *workers* at a time; results in point order."""
    if workers <= 1:
        return [fn(p) for p in points]
    return asyncio.run(_gather(points, fn, workers))


def _point_rows(spec, labels, models, data, P, value, tag):
    rows, walls, costs, paired = [], {}, {}, {}
    n_paired = min(spec.csgd_test_samples, data.n) if "CSGD" in labels else 0
    for label in labels:
        started = time.perf_counter()
        rates, cost = label_rates(spec, label, models.get(label), data, P)
        walls[f"{label}@{value:g}"] = time.perf_counter() - started
        costs[label] = cost
        report = summarize(rates)
        if n_paired:
            paired[f"{label}@{value:g}"] = summarize(rates[:n_paired]).sum_rate
        row = report.csv_row(config_hash=tag, M=data.M, K=data.K, P=P, phi=data.phi,
                             method=label, seed=spec.seed)
        rows.append({"axis": spec.axis, "value": repr(float(value)), **row})
    return rows, walls, costs, (n_paired, paired)


def _collect(spec: ExperimentSpec, results: list) -> ExperimentResult:
    out = ExperimentResult(spec, [])
    fronthaul, paired, n_paired = {}, {}, 0
    for rows, walls, costs, (n, sums) in results:
        out.rows.extend(rows)
        out.wall_times.update(walls)
        fronthaul.update(costs)
        paired.update(sums)
        n_paired = max(n_paired, n)
    out.extras["fronthaul_reals"] = fronthaul
    if n_paired:
        # every method again on the realizations CSGD was run on
        out.extras["csgd_subset"] = {"n_samples": n_paired, "sum_rate": paired}
    return out


def run_snr_sweep(spec: ExperimentSpec) -> ExperimentResult:
    if spec.axis != "snr_db":
        spec = dataclasses.replace(spec, axis="snr_db")
    tag = config_hash(spec)
    M_train = spec.m_train[0]
    labels = list(spec.methods)
    models = {}
    for snr in spec.snr_db:
        for label in labels:
            if label in constants.LEARNED_METHODS:
                models[(label, snr)] = resolve_model(spec, label, M_train, spec.phi_policy, snr)
    data = channel_set_for(spec, spec.M, spec.phi[0])
    log_event("runs", f"SNR sweep {list(spec.snr_db)} dB, M={spec.M}, K={spec.K}, n={data.n} [{tag}]")

    def point(snr):
        picked = {label: models.get((label, snr)) for label in labels}
        return _point_rows(spec, labels, picked, data, snr_to_power(snr), snr, tag)

    return _collect(spec, run_points(list(spec.snr_db), point, spec.workers))


def phi_labels(spec: ExperimentSpec) -> list[str]:
    labels = []
    for method in spec.methods:
        if method == "CL":
            labels += ["CL-uniform", "CL-nonrobust"]
            labels += [f"CL-fixed:{v:g}" for v in spec.train_phis]
        else:
            labels.append(method)
    return labels


def run_error_ratio_sweep(spec: ExperimentSpec) -> ExperimentResult:
    if spec.axis != "phi":
        spec = dataclasses.replace(spec, axis="phi")
    tag = config_hash(spec)
    snr, M_train, P = spec.snr_db[0], spec.m_train[0], spec.P
    labels = phi_labels(spec)
    models = {}
    for label in labels:
        method, policy = parse_label(label, spec.phi_policy)
        if method in constants.LEARNED_METHODS:
            models[label] = resolve_model(spec, method, M_train, policy, snr)
    log_event("runs", f"Error-ratio sweep {list(spec.phi)}, M={spec.M}, K={spec.K}, {snr:g} dB [{tag}]")

    def point(phi):
        return _point_rows(spec, labels, models, channel_set_for(spec, spec.M, phi), P, phi, tag)

    return _collect(spec, run_points(list(spec.phi), point, spec.workers))


@dataclass
class ScalabilityTable:
    m_train: tuple
    m_test: tuple
    relative: np.ndarray     # (len(m_train), len(m_test))
    result: ExperimentResult


def run_scalability_table(spec: ExperimentSpec) -> ScalabilityTable:
    """CL mean sum-rate / CSGD mean sum-rate for every (M_train, M_test)."""
    if spec.axis != "m_test":
        spec = dataclasses.replace(spec, axis="m_test")
    tag = config_hash(spec)
    snr, P, phi = spec.snr_db[0], spec.P, spec.phi[0]
    models = {m: resolve_model(spec, "CL", m, spec.phi_policy, snr) for m in spec.m_train}
    log_event("runs", f"Scalability M_train={list(spec.m_train)} x M_test={list(spec.m_tests)} [{tag}]")

    def column(M_test):
        data = channel_set_for(spec, M_test, phi)
        data = data.head(min(spec.csgd_test_samples, data.n))
        started = time.perf_counter()
        csgd, _ = evaluate_label(spec, "CSGD", None, data, P)
        cells = []
        for M_train in spec.m_train:
            cl, _ = evaluate_label(spec, "CL", models[M_train], data, P)
            cells.append((M_train, cl, csgd))
        return M_test, cells, time.perf_counter() - started

    result = ExperimentResult(spec, [], columns=list(SCALABILITY_COLUMNS))
    relative = np.empty((len(spec.m_train), len(spec.m_tests)))
    for j, (M_test, cells, wall) in enumerate(run_points(list(spec.m_tests), column, spec.workers)):
        result.wall_times[f"M_test={M_test}"] = wall
        for i, (M_train, cl, csgd) in enumerate(cells):
            relative[i, j] = cl.sum_rate / csgd.sum_rate
            result.rows.append({
                "config_hash": tag, "K": spec.K, "P_dB": repr(round(power_to_snr(P), 6)),
                "phi": repr(float(phi)), "M_train": M_train, "M_test": M_test,
                "cl_sum_rate": cl.sum_rate, "csgd_sum_rate": csgd.sum_rate,
                "relative": float(relative[i, j]), "n_samples": cl.sample_count, "seed": spec.seed,
            })
    result.rows.sort(key=lambda r: (r["M_train"], r["M_test"]))
    result.extras["relative"] = relative.tolist()
    return ScalabilityTable(tuple(spec.m_train), tuple(spec.m_tests), relative, result)


# ────────────────────────────────────────────────────────────────
# Single-shot runs
# ────────────────────────────────────────────────────────────────

def train_methods(spec: ExperimentSpec) -> dict:
    """Train every learned method listed in *spec* at its first M_train and SNR."""
    paths = {}
    for method in spec.methods:
        if method in constants.LEARNED_METHODS:
            _, paths[method] = train_model(spec, method, spec.m_train[0], spec.phi_policy,
                                           spec.snr_db[0])
    if not paths:
        raise ConfigError("methods", "no learned method (CL, NCL, SCL) to train")
    return paths


def evaluate_methods(spec: ExperimentSpec) -> ExperimentResult:
    """Evaluate stored checkpoints (and baselines) at one configuration."""
    tag = config_hash(spec)
    snr, P = spec.snr_db[0], spec.P
    models = {m: resolve_model(spec, m, spec.m_train[0], spec.phi_policy, snr)
              for m in spec.methods if m in constants.LEARNED_METHODS}
    data = channel_set_for(spec, spec.M, spec.phi[0])
    return _collect(spec, [_point_rows(spec, list(spec.methods), models, data, P, snr, tag)])


def csgd_trace(spec: ExperimentSpec) -> ExperimentResult:
    """Per-iteration CSGD trace on the first test realization."""
    data = draw_channel_set(spec.seed, spec.M, spec.K, 1, spec.phi[0])
    P = spec.P
    rho = LongTermCsi(data.rho[0])
    started = time.perf_counter()
    result = run_csgd(rho, data.h_hat[0], data.phi, spec.csgd_config(),
                      make_stream(spec.seed, "csgd", data.M, data.K, 0), P,
                      err=data.err[0], verbose=True)
    wall = time.perf_counter() - started

    columns = ["iteration", "exact_sum_rate"] + [f"saa_ap{i}" for i in range(data.M)] \
        + ["exchanged_reals"]
    rows = []
    for r in result.trace:
        row = {"iteration": r.iteration, "exact_sum_rate": r.exact_sum_rate,
               "exchanged_reals": r.exchanged_reals}
        row.update({f"saa_ap{i}": float(v) for i, v in enumerate(r.saa_values)})
        rows.append(row)

    equal = batch_rates(data.h_hat + data.err, data.h_hat, np.full(data.rho.shape, P / data.K))
    final = batch_rates(data.h_hat + data.err, data.h_hat, result.allocation[None])
    log_event("csgd", f"CSGD {final.sum():.4f} vs equal power {equal.sum():.4f} bit/s/Hz "
                      f"after {result.iterations} iterations", ok=True)
    out = ExperimentResult(spec, rows, columns=columns, wall_times={"csgd": wall})
    out.extras.update(converged=result.converged, iterations=result.iterations,
                      final_sum_rate=float(final.sum()), equal_power_sum_rate=float(equal.sum()))
    return out

