"""
Command: scalability
- relative sum-rate (CL / CSGD) for every (--m-train, --m-test) pair
"""
import pathlib

from commands import spec_from_args
from core.harness import config_hash, run_scalability_table


def run(args) -> int:
    spec = spec_from_args(args, axis="m_test")
    table = run_scalability_table(spec)
    table.result.write(pathlib.Path(spec.out_dir) / f"scalability_{config_hash(spec)}.csv")
    print("   M_train \\ M_test  " + "  ".join(f"{m:>6}" for m in table.m_test))
    for M_train, row in zip(table.m_train, table.relative):
        print(f"   {M_train:<17} " + "  ".join(f"{v:6.3f}" for v in row))
    return 0


def setup(registry) -> None:
    registry.add_command("scalability", "Relative sum-rate of CL versus CSGD across M.", run)
