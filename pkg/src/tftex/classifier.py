"""Nearest-neighbor classification over minimum matching energy features.

Plain 1-NN with Euclidean distance on raw feature values. Distance ties are
broken by earliest insertion order so runs are reproducible bit for bit. An
off-by-default standardization flag exists for ablation only.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError
from .features import FeatureRecord, FeatureVector

TIE_BREAK = "insertion-order"
MODEL_HEADER_FORMAT = "tftex-model"


@dataclass(frozen=True)
class Prediction:
    label: str
    distance: float
    neighbor_id: str


@dataclass(frozen=True)
class NNModel:
    """Training examples stored verbatim, in insertion order."""

    vectors: np.ndarray
    labels: tuple[str, ...]
    excerpt_ids: tuple[str, ...]
    dictionary_id: str
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise ValidationError(f"model needs a non-empty 2-D matrix, got {vectors.shape}")
        if len(self.labels) != vectors.shape[0] or len(self.excerpt_ids) != vectors.shape[0]:
            raise ValidationError("labels/excerpt_ids do not match the number of vectors")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def standardized(self) -> bool:
        return self.feature_mean is not None

    def transform(self, values: np.ndarray) -> np.ndarray:
        if self.feature_mean is None:
            return values
        return (values - self.feature_mean) / self.feature_scale


def fit(examples: list[tuple[FeatureVector, str, str]], *, standardize: bool = False) -> NNModel:
    """Store (feature vector, label, excerpt id) triples as a 1-NN model."""
    if not examples:
        raise ValidationError("cannot fit a nearest-neighbor model on no examples")
    dim = len(examples[0][0])
    dictionary_id = examples[0][0].dictionary_id
    for vector, _label, excerpt_id in examples:
        if len(vector) != dim:
            raise ValidationError(
                f"excerpt {excerpt_id!r} has {len(vector)} features, expected {dim}"
            )
        if vector.dictionary_id != dictionary_id:
            raise ValidationError(
                f"excerpt {excerpt_id!r} was extracted with dictionary "
                f"{vector.dictionary_id!r}, expected {dictionary_id!r}"
            )
    matrix = np.stack([v.values for v, _, _ in examples])
    mean = scale = None
    if standardize:
        mean = matrix.mean(axis=0)
        scale = matrix.std(axis=0)
        scale = np.where(scale == 0.0, 1.0, scale)
        matrix = (matrix - mean) / scale
    return NNModel(
        vectors=matrix,
        labels=tuple(label for _, label, _ in examples),
        excerpt_ids=tuple(excerpt_id for _, _, excerpt_id in examples),
        dictionary_id=dictionary_id,
        feature_mean=mean,
        feature_scale=scale,
    )


def predict(model: NNModel, x: FeatureVector) -> Prediction:
    """Label of the closest training vector; earliest index wins exact ties."""
    if len(x) != model.dim:
        raise ValidationError(f"query has {len(x)} features, model expects {model.dim}")
    if x.dictionary_id != model.dictionary_id:
        raise ValidationError(
            f"query dictionary {x.dictionary_id!r} does not match model "
            f"dictionary {model.dictionary_id!r}"
        )
    diff = model.vectors - model.transform(x.values)
    d2 = np.einsum("ij,ij->i", diff, diff)
    best = int(np.argmin(d2))
    return Prediction(
        label=model.labels[best],
        distance=float(np.sqrt(d2[best])),
        neighbor_id=model.excerpt_ids[best],
    )


def predict_batch(model: NNModel, xs: list[FeatureVector]) -> list[Prediction]:
    return [predict(model, x) for x in xs]


def fit_records(records: list[FeatureRecord], *, standardize: bool = False) -> NNModel:
    return fit([(r.vector, r.label, r.excerpt_id) for r in records], standardize=standardize)


def majority_label(labels: list[str]) -> tuple[str, bool]:
    """Most frequent label and whether the count was tied.

    Ties resolve to the earliest label in sorted order.
    """
    if not labels:
        raise ValidationError("no labels to vote over")
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    top = max(counts.values())
    winners = sorted(label for label, c in counts.items() if c == top)
    return winners[0], len(winners) > 1


def save_model_header(path, model: NNModel) -> None:
    """Companion JSON for a persisted feature table: provenance and tie-break."""
    header = {
        "format": MODEL_HEADER_FORMAT,
        "version": 1,
        "dictionary_id": model.dictionary_id,
        "tie_break": TIE_BREAK,
        "standardize": model.standardized,
        "n_examples": model.size,
        "feature_dim": model.dim,
    }
    with open(path, "w") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")


def load_model_header(path) -> dict:
    with open(path) as f:
        try:
            header = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a model header ({exc})") from None
    if header.get("format") != MODEL_HEADER_FORMAT:
        raise FormatError(f"{path}: not a model header")
    return header
