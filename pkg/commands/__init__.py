"""
Command modules.

Each module exposes ``setup(registry)``; main.py loads them in the order of
its COMMANDS list.  Shared flags and spec resolution live here.
"""
from __future__ import annotations

import argparse
import pathlib
from typing import Callable

from core.harness import ExperimentSpec, build_spec
from utils.errors import ConfigError
from utils.logger import LOG_TYPES, set_log_channel

# flag -> config key
EXPERIMENT_FLAGS = {
    "--seed": "seed",
    "--out": "out",
    "--m-train": "m_train",
    "--m-test": "m_test",
    "--k": "k",
    "--snr-db": "snr_db",
    "--phi": "phi",
    "--phi-policy": "phi_policy",
    "--samples": "samples",
    "--method": "methods",
    "--dataset": "dataset",
    "--workers": "workers",
    "--epochs": "epochs",
    "--checkpoint-dir": "checkpoint_dir",
}


class Registry:
    """Collects sub-commands for the top-level parser."""

    def __init__(self, parser: argparse.ArgumentParser):
        self.parser = parser
        self.subparsers = parser.add_subparsers(dest="command", metavar="<command>")
        self.commands: dict[str, str] = {}

    def add_command(self, name: str, help: str, handler: Callable[[argparse.Namespace], int],
                    experiment: bool = True) -> argparse.ArgumentParser:
        sub = self.subparsers.add_parser(name, help=help, description=help)
        sub.set_defaults(handler=handler)
        if experiment:
            add_experiment_flags(sub)
        self.commands[name] = help
        return sub


def add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="KEY=VALUE experiment config file")
    for flag, key in EXPERIMENT_FLAGS.items():
        parser.add_argument(flag, dest=key, metavar=key.upper(), default=None)
    parser.add_argument("--set", dest="extra", action="append", default=[], metavar="KEY=VALUE",
                        help="any other config key (repeatable)")


def spec_from_args(args: argparse.Namespace, axis: str = "snr_db") -> ExperimentSpec:
    overrides = {key: getattr(args, key, None) for key in EXPERIMENT_FLAGS.values()}
    for item in args.extra:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        overrides[key.strip().lower()] = value.strip()
    spec = build_spec(axis, getattr(args, "config", None), overrides)
    route_logs(spec)
    return spec


def route_logs(spec: ExperimentSpec) -> None:
    logs = pathlib.Path(spec.out_dir) / "logs"
    for log_type in LOG_TYPES:
        set_log_channel(log_type, logs / f"{log_type}.log")
