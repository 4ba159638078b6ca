#!/usr/bin/env python3
"""Plot the conditional LR -> HR mean/variance mapping from an eval run.

Usage:
    python scripts/plot_conditional_stats.py runs/desk_scale/eval/conditional_stats.csv out.png
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def main():
    if len(sys.argv) != 3:
        print(__doc__)
        sys.exit(2)
    csv_path, out_path = sys.argv[1], sys.argv[2]

    centers, counts, means, variances = [], [], [], []
    with open(csv_path) as fh:
        for row in csv.DictReader(fh):
            centers.append(float(row["bin_center"]))
            counts.append(int(row["count"]))
            means.append(float(row["hr_mean"]))
            variances.append(float(row["hr_variance"]))
    centers = np.asarray(centers)
    counts = np.asarray(counts)
    stable = counts >= 30

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.plot(centers, means, ".", ms=3, color="gray", label="all bins")
    ax1.plot(centers[stable], np.asarray(means)[stable], "o", ms=4, label=">=30 samples")
    ax1.plot(centers, centers, "--", lw=1, color="k", label="identity")
    ax1.set_xlabel("LR field (Gauss)")
    ax1.set_ylabel("mean HR field (Gauss)")
    ax1.legend(fontsize=8)

    ax2.plot(centers[stable], np.sqrt(np.asarray(variances)[stable]), "o", ms=4)
    ax2.set_xlabel("LR field (Gauss)")
    ax2.set_ylabel("HR field std within bin (Gauss)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
