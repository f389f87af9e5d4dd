#!/usr/bin/env python3
"""End-to-end synthetic benchmark: generate audio, classify, print the
confusion matrix as row percentages.

Example:
    python scripts/run_synthetic_experiment.py --per-size 20 --seed 0
"""

import argparse
import time

from tftex import ExperimentConfig, SynthSpec, run_experiment, synth_dataset


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--recordings", type=int, default=4)
    p.add_argument("--seconds", type=float, default=60.0)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--per-size", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    return p.parse_args()


def main():
    args = parse_args()
    started = time.perf_counter()
    dataset = synth_dataset(
        SynthSpec(
            classes=args.classes,
            recordings_per_class=args.recordings,
            seconds_per_recording=args.seconds,
            seed=args.seed,
        )
    )
    cfg = ExperimentConfig(
        per_size=args.per_size,
        per_class=args.per_class,
        seed=args.seed,
        threads=args.threads,
    )
    result = run_experiment(dataset, cfg)
    elapsed = time.perf_counter() - started

    width = max(len(c) for c in result.confusion.classes) + 2
    print(f"M={result.n_features} features, {len(result.split.train)} train / "
          f"{len(result.split.test)} test excerpts, {elapsed:.1f}s")
    header = " " * width + "".join(f"{c[:10]:>12}" for c in result.confusion.classes)
    print(header)
    for name, row in zip(result.confusion.classes, result.confusion.rates()):
        print(f"{name:<{width}}" + "".join(f"{v:12.1f}" for v in row))
    print(f"accuracy: {result.accuracy:.3f}")


if __name__ == "__main__":
    main()
