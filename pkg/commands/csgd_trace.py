"""
Command: csgd-trace
- per-iteration CSGD trace (exact sum-rate, per-AP SAA, exchanged reals)
"""
import pathlib

from commands import spec_from_args
from core.harness import config_hash, csgd_trace


def run(args) -> int:
    spec = spec_from_args(args)
    csgd_trace(spec).write(pathlib.Path(spec.out_dir) / f"csgd_trace_{config_hash(spec)}.csv")
    return 0


def setup(registry) -> None:
    registry.add_command("csgd-trace", "Trace CSGD on one channel realization.", run)
