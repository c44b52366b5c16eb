"""
Command: eval
- evaluates stored checkpoints and baselines at one configuration
"""
import pathlib

from commands import spec_from_args
from core.harness import config_hash, evaluate_methods


def run(args) -> int:
    spec = spec_from_args(args)
    result = evaluate_methods(spec)
    result.write(pathlib.Path(spec.out_dir) / f"eval_{config_hash(spec)}.csv")
    for row in result.rows:
        print(f"   {row['method']:<8} {float(row['mean_sum_rate']):.4f} "
              f"± {float(row['std_error']):.4f} (n={row['n_samples']})")
    return 0


def setup(registry) -> None:
    registry.add_command("eval", "Evaluate checkpoints and baselines.", run)
