"""
Command: sweep-snr
- average sum-rate of every method versus SNR (comma-separated --snr-db)
"""
import pathlib

from commands import spec_from_args
from core.harness import config_hash, run_snr_sweep


def run(args) -> int:
    spec = spec_from_args(args, axis="snr_db")
    run_snr_sweep(spec).write(pathlib.Path(spec.out_dir) / f"sweep_snr_{config_hash(spec)}.csv")
    return 0


def setup(registry) -> None:
    registry.add_command("sweep-snr", "Sum-rate versus SNR for every method.", run)
