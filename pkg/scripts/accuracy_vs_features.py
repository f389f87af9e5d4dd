#!/usr/bin/env python3
"""Accuracy versus feature count on the synthetic benchmark.

Sweeps nested dictionaries along a per-size schedule, averages over seeds,
writes a CSV, and optionally plots the curve.

Example:
    python scripts/accuracy_vs_features.py --schedule 2,5,10,20,60 \
        --seeds 0,1,2 --csv sweep.csv --plot sweep.png
"""

import argparse
from dataclasses import replace

import numpy as np

from tftex import ExperimentConfig, SynthSpec, sweep_features, synth_dataset


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--recordings", type=int, default=4)
    p.add_argument("--seconds", type=float, default=60.0)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--schedule", type=str, default="2,5,10,20,60")
    p.add_argument("--seeds", type=str, default="0")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", type=str, default="sweep.csv")
    p.add_argument("--plot", type=str, default=None,
                   help="Optional PNG path (requires matplotlib).")
    return p.parse_args()


def main():
    args = parse_args()
    schedule = [int(s) for s in args.schedule.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    dataset = synth_dataset(
        SynthSpec(
            classes=args.classes,
            recordings_per_class=args.recordings,
            seconds_per_recording=args.seconds,
            seed=args.data_seed,
        )
    )
    cfg = ExperimentConfig(per_class=args.per_class, threads=args.threads)
    curves = []
    ms = []
    for seed in seeds:
        rows = sweep_features(dataset, replace(cfg, seed=seed), schedule)
        ms = [m for m, _ in rows]
        curves.append([acc for _, acc in rows])
        print(f"seed {seed}: " + "  ".join(f"M={m}:{a:.3f}" for m, a in rows))

    accs = np.array(curves)
    with open(args.csv, "w") as f:
        f.write("M,mean_accuracy,std_accuracy\n")
        for i, m in enumerate(ms):
            f.write(f"{m},{accs[:, i].mean():.6f},{accs[:, i].std():.6f}\n")
    print(f"wrote {args.csv}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        mean = accs.mean(axis=0)
        std = accs.std(axis=0)
        plt.figure(figsize=(5, 3.2))
        plt.errorbar(ms, 100 * mean, yerr=100 * std, marker="o")
        plt.xlabel("number of features M")
        plt.ylabel("average accuracy (%)")
        plt.ylim(0, 102)
        plt.grid(alpha=0.3)
        plt.tight_layout()
        plt.savefig(args.plot, dpi=150)
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
