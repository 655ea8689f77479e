"""Plots sweep.csv and scan.csv written by `cpboot sweep` / `cpboot scan`.

    python scripts/plot.py out/yukawa-sweep/sweep.csv -o yukawa.png
    python scripts/plot.py out/conformal-scan/scan.csv -o scan.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_sweep(df, ax):
    df = df[df["status"] == "ok"].sort_values("coupling")
    ax.plot(df["coupling"], df["lower"], "o-", label="lower bound")
    upper = df[df["upper_kind"] == "bounded"]
    if len(upper):
        ax.plot(upper["coupling"], upper["upper"], "s-", label="upper bound")
    ref = df.dropna(subset=["oracle"])
    ax.plot(ref["coupling"], ref["oracle"], "k.", label="diagonalization")
    if df["coupling"].max() / max(df["coupling"].min(), 1e-300) > 20:
        ax.set_xscale("log")
    ax.set_xlabel("coupling")
    ax.set_ylabel("ground energy")
    ax.legend()


def plot_scan(df, ax):
    for order, marker, size in [(2, "s", 14), (3, "o", 6)]:
        cells = df[(df["order"] == order) & (df["feasible"].astype(str).str.lower() == "true")]
        ax.scatter(cells["energy"], cells["rinv"], marker=marker, s=size, label=f"{order}x{order} feasible")
    ax.set_xlabel("E")
    ax.set_ylabel("<1/r>")
    ax.legend()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", default="plot.png")
    args = ap.parse_args()
    df = pd.read_csv(args.csv)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if "coupling" in df.columns:
        plot_sweep(df, ax)
    elif "rinv" in df.columns:
        plot_scan(df, ax)
    else:
        raise SystemExit(f"{args.csv}: neither a sweep nor a scan file")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
