"""
Command: train
- trains every learned method (CL / NCL / SCL) in --method and stores checkpoints
  together with a per-epoch training CSV
"""
from commands import spec_from_args
from core.harness import train_methods


def run(args) -> int:
    spec = spec_from_args(args)
    for method, path in train_methods(spec).items():
        print(f"   {method}: {path}")
    return 0


def setup(registry) -> None:
    registry.add_command("train", "Train learned methods and save checkpoints.", run)
