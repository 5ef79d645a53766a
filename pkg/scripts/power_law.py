"""Small-data scattering size against mass for the defocusing d=1 flow, with a log-log fit.

    python scripts/power_law.py [--masses M ...]
"""

import argparse

import numpy as np

from mcnls.acceptance import small_data_S

ap = argparse.ArgumentParser()
ap.add_argument("--masses", type=float, nargs="+", default=[1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2, 3.2e-2])
args = ap.parse_args()

S = np.array([small_data_S(m) for m in args.masses])
slope = np.polyfit(np.log(args.masses), np.log(S), 1)[0]
for m, s in zip(args.masses, S):
    print(f"M = {m:9.3e}   S = {s:.6e}")
print(f"fitted exponent {slope:.4f} (expected 3)")
