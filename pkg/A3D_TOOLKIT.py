#!/usr/bin/env python3
"""
🎬 A3D TOOLKIT - LAUNCHER
Attribute-assisted action recognition: 3D CNN fusion + visual attributes, joined by a confidence gate

Usage: python A3D_TOOLKIT.py [command ...]    (no command runs the demo)
"""

import sys

from a3d.cli import main as cli_main


class A3DLauncher:
    """Launcher that shows the pipeline and hands over to the CLI"""

    def __init__(self, argv):
        """Initialize launcher"""
        self.argv = list(argv) or ["demo"]

    def display_welcome(self):
        print("🎬" * 40)
        print("A3D TOOLKIT".center(80))
        print("=" * 80)
        print("\n🎯 Pipeline:")
        print("🎞️ Stream features → ➕ Fusion (p1) → 🚦 Gate → 🏷️ Attribute classifier (p2)")
        print(f"\n▶️ Running: a3d {' '.join(self.argv)}\n")

    def run(self) -> int:
        self.display_welcome()
        return cli_main(self.argv)


def main() -> int:
    try:
        return A3DLauncher(sys.argv[1:]).run()
    except KeyboardInterrupt:
        print("\n👋 Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
