"""Plot a run directory written by `aggdiff run`.

    python scripts/plot.py out/stability-eps0.002 [--save fig.png]
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir", type=Path)
    ap.add_argument("--save", type=Path)
    args = ap.parse_args()

    solvers = [s for s in ("fv", "particles") if (args.run_dir / s / "diagnostics.csv").exists()]
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for s in solvers:
        d = pd.read_csv(args.run_dir / s / "diagnostics.csv")
        axes[0].plot(d.t, d.linf, label=s)
        axes[1].plot(d.t, d.m2, label=s)
        if d.w2_to_ref.notna().any():
            axes[2].semilogy(d.t, d.w2_to_ref, label=f"{s} to steady state")
    cross = args.run_dir / "cross_w2.csv"
    if cross.exists():
        c = pd.read_csv(cross)
        axes[2].semilogy(c.t, c.w2_particles_fv, label="particles to fv")
    for ax, title in zip(axes, ("sup norm", "second moment", "W2")):
        ax.set_title(title)
        ax.set_xlabel("t")
        ax.legend()
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
