"""Command-line surface: synth, train, classify, evaluate, sweep.

Every knob lives in one JSON config document and each field can be
overridden by a flag; the effective configuration is echoed into the output
directory for provenance. Exit codes: 0 success, 1 I/O failure, 2 validation.
"""

import functools
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .audio import read_wav, resample, write_wav
from .classifier import (
    fit_records,
    load_model_header,
    majority_label,
    predict_batch,
    save_model_header,
)
from .dictionary import BlockSize, load_dictionary, sample_blocks, save_dictionary
from .dsp import StftConfig, to_log_spectrogram
from .errors import ValidationError
from .evaluation import (
    ExperimentConfig,
    Recording,
    load_recordings,
    run_experiment,
    segment_excerpts,
    spectrograms_for,
    split_recordings,
    sweep_features,
)
from .features import (
    FeatureRecord,
    extract_features_batch,
    read_feature_csv,
    write_feature_binary,
    write_feature_csv,
)
from .synth import SynthSpec, synth_dataset

_DEFAULTS = {
    "window_ms": 50.0,
    "hop_divisor": 2,
    "epsilon": 1e-10,
    "sample_rate": 11025,
    "excerpt_s": 5.0,
    "sizes": "16x16,16x8,8x16,8x8,8x4,4x8,4x4",
    "per_size": 60,
    "per_class": 50,
    "seed": 0,
    "standardize": False,
    "threads": 1,
}


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _experiment_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file; flags override its fields."),
        click.option("--window-ms", type=float, default=None),
        click.option("--hop-divisor", type=int, default=None),
        click.option("--epsilon", type=float, default=None),
        click.option("--rate", "sample_rate", type=int, default=None),
        click.option("--excerpt-s", type=float, default=None),
        click.option("--sizes", type=str, default=None,
                     help="Comma-separated block sizes, e.g. 16x16,8x8."),
        click.option("--per-size", type=int, default=None),
        click.option("--per-class", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--standardize/--no-standardize", default=None),
        click.option("--threads", type=int, default=None),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _merge_config(config_path, overrides: dict) -> dict:
    effective = dict(_DEFAULTS)
    if config_path:
        with open(config_path) as f:
            try:
                file_cfg = json.load(f)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config file {config_path} is not valid JSON: {exc}")
        unknown = set(file_cfg) - set(_DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config fields in {config_path}: {sorted(unknown)}")
        effective.update(file_cfg)
    effective.update({k: v for k, v in overrides.items() if v is not None})
    return effective


def _experiment_config(effective: dict) -> ExperimentConfig:
    sizes = tuple(BlockSize.parse(s) for s in str(effective["sizes"]).split(","))
    return ExperimentConfig(
        stft=StftConfig(
            window_ms=float(effective["window_ms"]),
            hop_divisor=int(effective["hop_divisor"]),
            epsilon=float(effective["epsilon"]),
        ),
        sizes=sizes,
        per_size=int(effective["per_size"]),
        per_class=int(effective["per_class"]),
        excerpt_s=float(effective["excerpt_s"]),
        sample_rate=int(effective["sample_rate"]),
        seed=int(effective["seed"]),
        standardize=bool(effective["standardize"]),
        threads=int(effective["threads"]),
    )


def _echo_effective(out_dir: Path, effective: dict, extra: dict) -> None:
    doc = dict(effective)
    doc.update(extra)
    with open(out_dir / "effective_config.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


@click.group()
def main():
    """Classify audio by treating log-spectrograms as texture images."""


@main.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--classes", type=int, default=4, show_default=True)
@click.option("--recordings", type=int, default=4, show_default=True)
@click.option("--seconds", type=float, default=30.0, show_default=True)
@click.option("--rate", type=int, default=11025, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite a non-empty target directory.")
@_guarded
def synth(out_dir, classes, recordings, seconds, rate, seed, force):
    """Materialize a synthetic WAV dataset tree."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise ValidationError(f"target directory {out} is not empty (use --force to overwrite)")
    spec = SynthSpec(
        classes=classes,
        recordings_per_class=recordings,
        seconds_per_recording=seconds,
        sample_rate=rate,
        seed=seed,
    )
    dataset = synth_dataset(spec)
    for rec in dataset:
        path = out / f"{rec.recording_id}.wav"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(path, rec.clip)
    click.echo(f"wrote {len(dataset)} recordings across {classes} classes to {out}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_experiment_options
@_guarded
def train(data_dir, out_dir, config_path, **overrides):
    """Learn a dictionary and training features; persist the model artifacts."""
    effective = _merge_config(config_path, overrides)
    cfg = _experiment_config(effective)
    dataset = load_recordings(data_dir)
    split_seed, dict_seed = cfg.derived_seeds()
    split = split_recordings(dataset, cfg.per_class, cfg.excerpt_s, split_seed)
    train_spects = spectrograms_for(dataset, list(split.train), cfg)
    dictionary = sample_blocks(
        train_spects, list(cfg.sizes), cfg.per_size, dict_seed, stft_cfg=cfg.stft
    )
    vectors = extract_features_batch(train_spects, dictionary, threads=cfg.threads)
    records = [
        FeatureRecord(ref.excerpt_id, ref.label, vec) for ref, vec in zip(split.train, vectors)
    ]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dictionary(dictionary, out / "dictionary.tftx")
    write_feature_csv(out / "train_features.csv", records)
    write_feature_binary(out / "train_features.bin", records)
    model = fit_records(records, standardize=cfg.standardize)
    save_model_header(out / "model.json", model)
    manifest = {
        "seed": split.seed,
        "per_class": split.per_class,
        "train": [[r.recording_id, r.index, r.label] for r in split.train],
        "test": [[r.recording_id, r.index, r.label] for r in split.test],
    }
    with open(out / "split.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    _echo_effective(out, effective, {"command": "train", "data": str(data_dir)})

    counts: dict[str, int] = {}
    for ref in split.train:
        counts[ref.label] = counts.get(ref.label, 0) + 1
    click.echo(f"M={len(dictionary)} blocks ({len(cfg.sizes)} sizes x {cfg.per_size})")
    for label in sorted(counts):
        click.echo(f"  {label}: {counts[label]} training excerpts")


@main.command()
@click.option("--model-dir", type=click.Path(), required=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.argument("wav_path", type=click.Path())
@_guarded
def classify(model_dir, threads, wav_path):
    """Classify a WAV file excerpt by excerpt and report the majority label."""
    model_path = Path(model_dir)
    with open(model_path / "effective_config.json") as f:
        effective = json.load(f)
    cfg = _experiment_config({k: effective[k] for k in _DEFAULTS})
    dictionary = load_dictionary(model_path / "dictionary.tftx")
    header = load_model_header(model_path / "model.json")
    if dictionary.fingerprint() != header["dictionary_id"]:
        raise ValidationError(
            f"dictionary {model_path / 'dictionary.tftx'} does not match the model header "
            f"({dictionary.fingerprint()} vs {header['dictionary_id']})"
        )
    records = read_feature_csv(model_path / "train_features.csv", header["dictionary_id"])
    model = fit_records(records, standardize=header["standardize"])

    clip = resample(read_wav(wav_path), cfg.sample_rate)
    source = Recording(clip, class_label="", recording_id=Path(wav_path).name)
    excerpts = segment_excerpts(source, cfg.excerpt_s)
    if not excerpts:
        raise ValidationError(
            f"input {wav_path} is {clip.duration_s:.2f}s, shorter than one "
            f"{cfg.excerpt_s:.2f}s excerpt"
        )
    spects = [to_log_spectrogram(e, cfg.stft) for e in excerpts]
    vectors = extract_features_batch(spects, dictionary, threads=threads)
    predictions = predict_batch(model, vectors)
    for excerpt, pred in zip(excerpts, predictions):
        click.echo(
            f"{excerpt.source_id}\t{pred.label}\tdistance={pred.distance:.6g}"
            f"\tneighbor={pred.neighbor_id}"
        )
    winner, tied = majority_label([p.label for p in predictions])
    click.echo(f"majority: {winner}" + (" (tie)" if tied else ""))


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_experiment_options
@_guarded
def evaluate(data_dir, out_dir, config_path, **overrides):
    """Run the full protocol and write confusion.csv plus accuracy.txt."""
    effective = _merge_config(config_path, overrides)
    cfg = _experiment_config(effective)
    dataset = load_recordings(data_dir)
    result = run_experiment(dataset, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "confusion.csv", "w", newline="") as f:
        f.write(result.confusion.to_csv_text())
    with open(out / "accuracy.txt", "w") as f:
        f.write(f"{result.accuracy:.3f}\n")
    _echo_effective(out, effective, {"command": "evaluate", "data": str(data_dir)})
    click.echo(f"M={result.n_features} accuracy={result.accuracy:.3f}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--schedule", type=str, required=True,
              help="Comma-separated, strictly increasing per-size counts, e.g. 5,20,60.")
@click.option("--seeds", type=str, default=None,
              help="Comma-separated seeds to average over (default: the single --seed).")
@_experiment_options
@_guarded
def sweep(data_dir, out_dir, schedule, seeds, config_path, **overrides):
    """Evaluate accuracy along a feature-count schedule, averaged over seeds."""
    effective = _merge_config(config_path, overrides)
    cfg = _experiment_config(effective)
    try:
        steps = [int(s) for s in schedule.split(",")]
    except ValueError:
        raise ValidationError(f"cannot parse schedule {schedule!r}") from None
    seed_list = [cfg.seed]
    if seeds is not None:
        try:
            seed_list = [int(s) for s in seeds.split(",")]
        except ValueError:
            raise ValidationError(f"cannot parse seeds {seeds!r}") from None
    dataset = load_recordings(data_dir)
    per_seed = []
    ms = []
    for seed in seed_list:
        rows = sweep_features(dataset, replace(cfg, seed=seed), steps)
        ms = [m for m, _ in rows]
        per_seed.append([acc for _, acc in rows])
    accs = np.array(per_seed)  # (n_seeds, n_steps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as f:
        f.write("M,mean_accuracy,std_accuracy\n")
        for i, m in enumerate(ms):
            f.write(f"{m},{accs[:, i].mean():.6f},{accs[:, i].std():.6f}\n")
    _echo_effective(
        out, effective,
        {"command": "sweep", "data": str(data_dir), "schedule": steps, "seeds": seed_list},
    )
    for i, m in enumerate(ms):
        click.echo(f"M={m} mean={accs[:, i].mean():.3f} std={accs[:, i].std():.3f}")


if __name__ == "__main__":
    main()
