"""
cellfree-powerlab — Main Entrypoint

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
import argparse
import importlib
import sys
import traceback

from dotenv import load_dotenv

load_dotenv()

from utils.errors import LabError  # noqa: E402

# -------------------------------------------------------------------
# Command list — loaded in order
# -------------------------------------------------------------------
COMMANDS = [
    "commands.gen_data",
    "commands.train",
    "commands.eval",
    "commands.sweep_snr",
    "commands.sweep_phi",
    "commands.scalability",
    "commands.csgd_trace",
    "commands.help",
]


def build_parser():
    from commands import Registry

    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Decentralized power control experiments for cell-free massive MIMO.",
    )
    registry = Registry(parser)
    for name in COMMANDS:
        try:
            importlib.import_module(name).setup(registry)
        except Exception as e:
            print(f"   ❌ Failed to load {name}: {e}", file=sys.stderr)
    return parser, registry


def main(argv=None) -> int:
    parser, _ = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse: 0 for --help, 2 for usage errors
        return int(e.code or 0)

    if not getattr(args, "command", None):
        parser.print_help()
        return 0

    try:
        return int(args.handler(args) or 0)
    except LabError as e:
        print(f"❌ {e.message}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        traceback.print_exception(type(e), e, e.__traceback__)
        return 3


if __name__ == "__main__":
    sys.exit(main())
