"""Run every scenario (or the named ones) through the CLI and summarize exit codes.

    python scripts/run_scenarios.py [--output-dir DIR] [NAME ...]
"""

import argparse
import sys

from mcnls.cli import main as cli
from mcnls.scenarios import SCENARIOS

ap = argparse.ArgumentParser()
ap.add_argument("names", nargs="*", default=list(SCENARIOS))
ap.add_argument("--output-dir", default="mcnls-out")
ap.add_argument("--no-plots", action="store_true")
args = ap.parse_args()

codes = {}
for name in args.names:
    print(f"== {name}")
    argv = ["run", name, "--output-dir", args.output_dir] + (["--no-plots"] if args.no_plots else [])
    codes[name] = cli(argv)
print()
for name, code in codes.items():
    print(f"{name:16s} exit {code}")
sys.exit(max(codes.values(), default=0))
