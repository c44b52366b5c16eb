"""
Command: gen-data
- writes a channel test set (deployments + estimates + errors) with manifest
"""
import pathlib

from commands import spec_from_args
from core.harness import generate_dataset


def run(args) -> int:
    spec = spec_from_args(args)
    target = args.dataset_dir or pathlib.Path(spec.out_dir) / "dataset"
    manifest = generate_dataset(spec, target)
    print(f"   n={manifest['n']} M={manifest['M']} K={manifest['K']} phi={manifest['phi']}")
    return 0


def setup(registry) -> None:
    sub = registry.add_command("gen-data", "Generate and store a channel test set.", run)
    sub.add_argument("--to", dest="dataset_dir", metavar="DIR",
                     help="dataset directory (default: <out>/dataset)")
