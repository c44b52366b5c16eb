"""
Command: help
- lists every loaded command with its description
"""


def setup(registry) -> None:
    def run(args) -> int:
        print("📖 Commands")
        width = max(len(name) for name in registry.commands)
        for name, description in registry.commands.items():
            print(f"   {name:<{width}}  {description}")
        print("\n   Run `main.py <command> --help` for the flags of one command.")
        return 0

    registry.add_command("help", "Show available commands.", run, experiment=False)
