"""Experiment protocol: excerpt segmentation, recording-disjoint splits,
end-to-end runs with confusion matrices, and accuracy-vs-feature-count sweeps.

Classification operates on fixed-length non-overlapping excerpts. Train and
test sets are balanced per class and never share a source recording: each
class's recordings are shuffled and assigned greedily to the training pool
until it can supply the requested excerpt count, the remainder forming the
test pool.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_wav, resample
from .classifier import fit, predict_batch
from .dictionary import BlockSize, default_sizes, sample_blocks
from .dsp import LogSpectrogram, StftConfig, to_log_spectrogram
from .errors import ValidationError
from .features import FeatureRecord, FeatureVector, extract_features_batch

DEFAULT_SAMPLE_RATE = 11025
DEFAULT_EXCERPT_S = 5.0


@dataclass(frozen=True)
class Recording:
    """A labelled source recording; the unit of train/test disjointness."""

    clip: AudioClip
    class_label: str
    recording_id: str


@dataclass(frozen=True)
class ExcerptRef:
    """A pointer to one fixed-length excerpt of a recording."""

    recording_id: str
    index: int
    label: str

    @property
    def excerpt_id(self) -> str:
        return f"{self.recording_id}#{self.index:03d}"


@dataclass(frozen=True)
class SplitPlan:
    """Balanced train/test excerpt selection with disjoint source recordings."""

    train: tuple[ExcerptRef, ...]
    test: tuple[ExcerptRef, ...]
    seed: int
    per_class: int

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        shared = {r.recording_id for r in self.train} & {r.recording_id for r in self.test}
        if shared:
            raise ValidationError(f"recordings appear on both sides of the split: {sorted(shared)}")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of true class (rows) against predicted class (columns)."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.classes)
        if counts.shape != (n, n):
            raise ValidationError(f"counts shape {counts.shape} does not match {n} classes")
        if counts.size and counts.min() < 0:
            raise ValidationError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def rates(self) -> np.ndarray:
        """Row-normalized percentages (rate of row class predicted as column class)."""
        row_sums = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            return np.where(row_sums > 0, 100.0 * self.counts / row_sums, 0.0)

    def to_csv_text(self) -> str:
        lines = ["label," + ",".join(self.classes)]
        for name, row in zip(self.classes, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def segment_excerpts(rec: Recording, excerpt_s: float) -> list[AudioClip]:
    """Contiguous non-overlapping excerpts; the trailing remainder is dropped."""
    if not excerpt_s > 0:
        raise ValidationError(f"excerpt length must be positive, got {excerpt_s}")
    samples_per = int(round(excerpt_s * rec.clip.sample_rate))
    n = rec.clip.samples.size // samples_per
    return [
        AudioClip(
            rec.clip.samples[i * samples_per : (i + 1) * samples_per],
            rec.clip.sample_rate,
            source_id=f"{rec.recording_id}#{i:03d}",
            label=rec.class_label,
        )
        for i in range(n)
    ]


def excerpt_count(rec: Recording, excerpt_s: float) -> int:
    samples_per = int(round(excerpt_s * rec.clip.sample_rate))
    return rec.clip.samples.size // samples_per


def split_recordings(
    dataset: list[Recording], per_class: int, excerpt_s: float, seed: int
) -> SplitPlan:
    """Per class: partition recordings into pools, then draw balanced excerpts."""
    if per_class < 1:
        raise ValidationError(f"per_class must be >= 1, got {per_class}")
    by_class: dict[str, list[Recording]] = {}
    for rec in dataset:
        by_class.setdefault(rec.class_label, []).append(rec)
    if not by_class:
        raise ValidationError("dataset holds no recordings")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed)))
    train: list[ExcerptRef] = []
    test: list[ExcerptRef] = []
    problems: list[str] = []
    for label in sorted(by_class):
        recs = sorted(by_class[label], key=lambda r: r.recording_id)
        counts = {r.recording_id: excerpt_count(r, excerpt_s) for r in recs}
        if len(recs) < 2:
            problems.append(
                f"class {label!r} has {len(recs)} recording(s); at least 2 are needed "
                f"for a recording-disjoint split"
            )
            continue
        order = rng.permutation(len(recs))
        train_pool: list[Recording] = []
        cum = 0
        stop = 0
        for stop, idx in enumerate(order):
            train_pool.append(recs[idx])
            cum += counts[recs[idx].recording_id]
            if cum >= per_class:
                break
        test_pool = [recs[idx] for idx in order[stop + 1 :]]
        test_total = sum(counts[r.recording_id] for r in test_pool)
        if cum < per_class or test_total < per_class:
            problems.append(
                f"class {label!r} cannot supply {per_class} excerpts per side: "
                f"train pool has {cum}, test pool has {test_total} "
                f"(recordings: {', '.join(f'{r.recording_id}={counts[r.recording_id]}' for r in recs)})"
            )
            continue
        train.extend(_draw(train_pool, counts, label, per_class, rng))
        test.extend(_draw(test_pool, counts, label, per_class, rng))
    if problems:
        raise ValidationError("split infeasible: " + "; ".join(problems))
    return SplitPlan(train=tuple(train), test=tuple(test), seed=int(seed), per_class=per_class)


def _draw(pool, counts, label, per_class, rng) -> list[ExcerptRef]:
    refs = [
        ExcerptRef(rec.recording_id, i, label)
        for rec in pool
        for i in range(counts[rec.recording_id])
    ]
    chosen = sorted(rng.choice(len(refs), size=per_class, replace=False).tolist())
    return [refs[i] for i in chosen]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; all randomness flows from ``seed``."""

    stft: StftConfig = StftConfig()
    sizes: tuple[BlockSize, ...] = field(default_factory=lambda: tuple(default_sizes()))
    per_size: int = 60
    per_class: int = 50
    excerpt_s: float = DEFAULT_EXCERPT_S
    sample_rate: int = DEFAULT_SAMPLE_RATE
    seed: int = 0
    standardize: bool = False
    threads: int = 1

    def derived_seeds(self) -> tuple[int, int]:
        """Independent (split, dictionary) seeds derived from the master seed."""
        state = np.random.SeedSequence(self.seed).generate_state(2, np.uint64)
        return int(state[0]), int(state[1])


@dataclass(frozen=True)
class ExperimentResult:
    confusion: ConfusionMatrix
    accuracy: float
    split: SplitPlan
    dictionary_id: str
    n_features: int
    train_records: tuple[FeatureRecord, ...]
    test_records: tuple[FeatureRecord, ...]
    predictions: tuple[str, ...]  # predicted label per test record, in order


def spectrograms_for(
    dataset: list[Recording], refs: list[ExcerptRef], cfg: ExperimentConfig
) -> list[LogSpectrogram]:
    by_id = {rec.recording_id: rec for rec in dataset}
    needed: dict[str, list[ExcerptRef]] = {}
    for ref in refs:
        needed.setdefault(ref.recording_id, []).append(ref)
    spect_by_excerpt: dict[str, LogSpectrogram] = {}
    for recording_id, recording_refs in needed.items():
        rec = by_id[recording_id]
        clip = resample(rec.clip, cfg.sample_rate)
        excerpts = segment_excerpts(
            Recording(clip, rec.class_label, rec.recording_id), cfg.excerpt_s
        )
        for ref in recording_refs:
            spect_by_excerpt[ref.excerpt_id] = to_log_spectrogram(excerpts[ref.index], cfg.stft)
    return [spect_by_excerpt[ref.excerpt_id] for ref in refs]


def confusion_from_labels(
    classes: list[str], truths: list[str], predicted: list[str]
) -> ConfusionMatrix:
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truths, predicted):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(classes=tuple(classes), counts=counts)


def _records(refs, spects, vectors) -> tuple[FeatureRecord, ...]:
    return tuple(
        FeatureRecord(ref.excerpt_id, ref.label, vec) for ref, vec in zip(refs, vectors)
    )


def run_experiment(dataset: list[Recording], cfg: ExperimentConfig) -> ExperimentResult:
    """Full pipeline: segment, split, learn blocks, extract, classify, tabulate."""
    split_seed, dict_seed = cfg.derived_seeds()
    split = split_recordings(dataset, cfg.per_class, cfg.excerpt_s, split_seed)
    train_spects = spectrograms_for(dataset, list(split.train), cfg)
    test_spects = spectrograms_for(dataset, list(split.test), cfg)
    dictionary = sample_blocks(
        train_spects, list(cfg.sizes), cfg.per_size, dict_seed, stft_cfg=cfg.stft
    )
    train_vecs = extract_features_batch(train_spects, dictionary, threads=cfg.threads)
    test_vecs = extract_features_batch(test_spects, dictionary, threads=cfg.threads)
    train_records = _records(split.train, train_spects, train_vecs)
    test_records = _records(split.test, test_spects, test_vecs)

    model = fit(
        [(r.vector, r.label, r.excerpt_id) for r in train_records], standardize=cfg.standardize
    )
    predictions = predict_batch(model, [r.vector for r in test_records])
    classes = sorted({rec.class_label for rec in dataset})
    confusion = confusion_from_labels(
        classes, [r.label for r in test_records], [p.label for p in predictions]
    )
    return ExperimentResult(
        confusion=confusion,
        accuracy=confusion.accuracy,
        split=split,
        dictionary_id=dictionary.fingerprint(),
        n_features=len(dictionary),
        train_records=train_records,
        test_records=test_records,
        predictions=tuple(p.label for p in predictions),
    )


def sweep_features(
    dataset: list[Recording], cfg: ExperimentConfig, per_size_schedule: list[int]
) -> list[tuple[int, float]]:
    """Accuracy at each feature count M = len(sizes) * per_size along a schedule.

    The schedule must be strictly increasing. Per-size RNG streams make the
    dictionary at each step a prefix of the next one, so features are
    extracted once at the largest step and column prefixes are reused.
    """
    if not per_size_schedule:
        raise ValidationError("empty per_size schedule")
    if any(b <= a for a, b in zip(per_size_schedule, per_size_schedule[1:])):
        raise ValidationError(f"schedule must be strictly increasing, got {per_size_schedule}")
    if per_size_schedule[0] < 1:
        raise ValidationError(f"schedule entries must be >= 1, got {per_size_schedule}")

    full_cfg = replace(cfg, per_size=per_size_schedule[-1])
    split_seed, dict_seed = full_cfg.derived_seeds()
    split = split_recordings(dataset, full_cfg.per_class, full_cfg.excerpt_s, split_seed)
    train_spects = spectrograms_for(dataset, list(split.train), full_cfg)
    test_spects = spectrograms_for(dataset, list(split.test), full_cfg)
    dictionary = sample_blocks(
        train_spects, list(full_cfg.sizes), full_cfg.per_size, dict_seed, stft_cfg=full_cfg.stft
    )
    train_vecs = extract_features_batch(train_spects, dictionary, threads=full_cfg.threads)
    test_vecs = extract_features_batch(test_spects, dictionary, threads=full_cfg.threads)

    classes = sorted({rec.class_label for rec in dataset})
    results = []
    for per_size in per_size_schedule:
        m = per_size * len(full_cfg.sizes)
        step_id = dictionary.prefix(per_size).fingerprint()
        step_train = [
            (FeatureVector(v.values[:m], step_id), ref.label, ref.excerpt_id)
            for v, ref in zip(train_vecs, split.train)
        ]
        model = fit(step_train, standardize=full_cfg.standardize)
        queries = [FeatureVector(v.values[:m], step_id) for v in test_vecs]
        predictions = predict_batch(model, queries)
        confusion = confusion_from_labels(
            classes, [r.label for r in split.test], [p.label for p in predictions]
        )
        results.append((m, confusion.accuracy))
    return results


def load_recordings(root) -> list[Recording]:
    """Ingest a dataset tree laid out as <root>/<class_label>/<recording>.wav."""
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValidationError(f"dataset root {root} contains no class directories")
    recordings: list[Recording] = []
    for class_dir in class_dirs:
        wavs = sorted(class_dir.glob("*.wav"))
        if not wavs:
            raise ValidationError(f"class directory {class_dir} contains no WAV files")
        for wav in wavs:
            rel = wav.relative_to(root).as_posix()
            clip = read_wav(wav, source_id=rel, label=class_dir.name)
            recordings.append(Recording(clip=clip, class_label=class_dir.name, recording_id=rel))
    return recordings
