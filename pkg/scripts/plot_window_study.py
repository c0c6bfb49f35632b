"""Plot a window-study grid CSV (size_s, step_s, f1_mean, f1_std) as grouped bars.

    python scripts/plot_window_study.py grid.csv grid.png
"""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("png")
    args = ap.parse_args()

    cells = defaultdict(dict)
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            cells[float(row["size_s"])][float(row["step_s"])] = (float(row["f1_mean"]), float(row["f1_std"]))
    sizes = sorted(cells)
    steps = sorted({s for d in cells.values() for s in d})

    width = 0.8 / len(steps)
    x = np.arange(len(sizes))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for j, step in enumerate(steps):
        m = [cells[s].get(step, (np.nan, 0))[0] for s in sizes]
        e = [cells[s].get(step, (np.nan, 0))[1] for s in sizes]
        ax.bar(x + (j - (len(steps) - 1) / 2) * width, m, width, yerr=e, capsize=2, label=f"step {step:g} s")
    ax.set_xticks(x, [f"{s:g} s" for s in sizes])
    ax.set_xlabel("window size")
    ax.set_ylabel("window F1 (LOSO mean)")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.png, dpi=150)


if __name__ == "__main__":
    main()
