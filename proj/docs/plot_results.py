#!/usr/bin/env python3
"""Render aggregate.csv as log-log MSE curves. Convenience only; the CSV
files are the interface."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    if len(sys.argv) != 3:
        print("usage: plot_results.py aggregate.csv out.png", file=sys.stderr)
        return 1
    curves = defaultdict(lambda: ([], [], []))
    with open(sys.argv[1], newline="") as fh:
        for row in csv.DictReader(fh):
            ts, ms, se = curves[row["algorithm"]]
            ts.append(int(row["t"]))
            ms.append(float(row["mean_mse"]))
            se.append(float(row["stderr_mse"]))
    fig, ax = plt.subplots(figsize=(7, 5))
    for name, (ts, ms, se) in sorted(curves.items()):
        ax.errorbar(ts, ms, yerr=se, label=name, marker="o", markersize=3, linewidth=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("observations")
    ax.set_ylabel("mean squared error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(sys.argv[2], dpi=150)
    print(f"wrote {sys.argv[2]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
