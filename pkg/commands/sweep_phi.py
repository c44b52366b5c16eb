"""
Command: sweep-phi
- average sum-rate versus error ratio (comma-separated --phi), including the
  robust, non-robust and fixed-phi CL variants
"""
import pathlib

from commands import spec_from_args
from core.harness import config_hash, run_error_ratio_sweep


def run(args) -> int:
    spec = spec_from_args(args, axis="phi")
    path = pathlib.Path(spec.out_dir) / f"sweep_phi_{config_hash(spec)}.csv"
    run_error_ratio_sweep(spec).write(path)
    return 0


def setup(registry) -> None:
    registry.add_command("sweep-phi", "Sum-rate versus channel error ratio.", run)
