"""Retrieval and few-shot classification harness over precomputed embeddings.

Retrieval scores label relevance with mean average precision; few-shot
classification offers cosine-to-prototype, shared-covariance linear
discriminant, and zero-shot text classifiers over a seeded balanced
shot/test split. Ties everywhere break toward the lowest index so results
are bit-stable across implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .core import (
    EmbeddingSet,
    LabeledEmbeddingSet,
    SimilarityMatrix,
    ZERO_NORM_TOL,
    normalize_rows,
)
from .errors import (
    DimensionMismatch,
    EmptyClass,
    NoRelevant,
    ShapeMismatch,
    SingularCovariance,
    ValidationError,
    ZeroRow,
)
from .seeding import rng_from_seed


class ClassifierKind(Enum):
    PROTOTYPE = "prototype"
    LDA = "lda"
    ZERO_SHOT_TEXT = "zeroshot"


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    """Average precision per evaluated query, their mean, and the indices of
    queries skipped for lack of relevant gallery items."""

    per_query_ap: np.ndarray
    mean_ap: float
    skipped_queries: np.ndarray

    def __post_init__(self) -> None:
        aps = np.array(self.per_query_ap, dtype=np.float64)
        skipped = np.array(self.skipped_queries, dtype=np.int64)
        if aps.size == 0:
            raise ValidationError("at least one query must be evaluated")
        if float(aps.min()) < 0.0 or float(aps.max()) > 1.0:
            raise ValidationError("average precision values must lie in [0, 1]")
        if not 0.0 <= self.mean_ap <= 1.0:
            raise ValidationError(f"mean AP {self.mean_ap} outside [0, 1]")
        aps.setflags(write=False)
        skipped.setflags(write=False)
        object.__setattr__(self, "per_query_ap", aps)
        object.__setattr__(self, "skipped_queries", skipped)


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """C x d weight rows plus biases; prototype rows are unit vectors."""

    weights: np.ndarray
    biases: np.ndarray
    kind: ClassifierKind

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64)
        biases = np.array(self.biases, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] < 2:
            raise ValidationError(f"need a 2-D weight matrix with C >= 2, got {weights.shape}")
        if biases.shape != (weights.shape[0],):
            raise ValidationError("biases must hold one value per class")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ValidationError("classifier parameters contain non-finite entries")
        if self.kind is ClassifierKind.PROTOTYPE:
            dev = float(np.max(np.abs(np.linalg.norm(weights, axis=1) - 1.0)))
            if dev > 1e-6:
                raise ValidationError(f"prototype rows deviate from unit norm by {dev:.3e}")
        weights.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]


def retrieval_map(
    queries: LabeledEmbeddingSet,
    gallery: LabeledEmbeddingSet,
    sim: SimilarityMatrix,
    exclude_self: bool = False,
) -> RetrievalResult:
    """Mean average precision of label-relevant retrieval.

    Gallery items are ranked per query by descending similarity, ties broken
    by ascending gallery index; AP is the mean over relevant ranks k of
    (relevant in top-k) / k. With ``exclude_self`` the gallery item whose
    index equals the query index is dropped, for querying a set against
    itself. Queries without any relevant gallery item are skipped and
    reported in ``skipped_queries``.

    Raises:
        ShapeMismatch: if ``sim`` is not |queries| x |gallery|, or
            ``exclude_self`` is used with differently sized sets.
        NoRelevant: if every query is skipped.
    """
    n_queries, n_gallery = queries.embeddings.n, gallery.embeddings.n
    if sim.data.shape != (n_queries, n_gallery):
        raise ShapeMismatch(
            f"similarity shape {sim.data.shape} != ({n_queries}, {n_gallery})"
        )
    if exclude_self and n_queries != n_gallery:
        raise ShapeMismatch("self-exclusion requires query i to be gallery item i")
    aps: list[float] = []
    skipped: list[int] = []
    for q in range(n_queries):
        scores = sim.data[q]
        relevant = gallery.labels == queries.labels[q]
        if exclude_self:
            keep = np.ones(n_gallery, dtype=bool)
            keep[q] = False
            scores = scores[keep]
            relevant = relevant[keep]
        if not relevant.any():
            skipped.append(q)
            continue
        order = np.argsort(-scores, kind="stable")
        hits = relevant[order]
        ranks = np.flatnonzero(hits) + 1
        precisions = np.cumsum(hits)[ranks - 1] / ranks
        aps.append(float(precisions.mean()))
    if not aps:
        raise NoRelevant("no query has a relevant gallery item")
    return RetrievalResult(
        per_query_ap=np.array(aps),
        mean_ap=float(np.mean(aps)),
        skipped_queries=np.array(skipped, dtype=np.int64),
    )


def _class_means(ds: LabeledEmbeddingSet) -> np.ndarray:
    n_classes = ds.n_classes
    sums = np.zeros((n_classes, ds.embeddings.dim))
    np.add.at(sums, ds.labels, ds.embeddings.data)
    counts = np.bincount(ds.labels, minlength=n_classes)
    return sums / counts[:, None]


def _unit_mean_classifier(ds: LabeledEmbeddingSet, kind: ClassifierKind) -> LinearClassifier:
    means = _class_means(ds)
    norms = np.linalg.norm(means, axis=1)
    if np.any(norms <= ZERO_NORM_TOL):
        raise ZeroRow(f"class {int(np.argmin(norms))} has a (near-)zero mean embedding")
    return LinearClassifier(means / norms[:, None], np.zeros(ds.n_classes), kind)


def prototype_classifier(fewshot: LabeledEmbeddingSet) -> LinearClassifier:
    """Nearest class mean under cosine: weight rows are unit-normalized
    class means of the shots, biases zero."""
    return _unit_mean_classifier(fewshot, ClassifierKind.PROTOTYPE)


def zero_shot_classifier(class_text: LabeledEmbeddingSet) -> LinearClassifier:
    """Weight rows are unit-normalized means of each class's text
    embeddings (one or more prompts per class), biases zero."""
    return _unit_mean_classifier(class_text, ClassifierKind.ZERO_SHOT_TEXT)


def lda_classifier(
    fewshot: LabeledEmbeddingSet,
    shrinkage: float = 0.1,
    *,
    allow_singular: bool = True,
) -> LinearClassifier:
    """Linear discriminant with one pooled covariance shared by all classes.

    The pooled within-class covariance is shrunk toward its scaled-identity
    trace, S = (1-shrinkage) S_pooled + shrinkage (tr(S_pooled)/d) I; weight
    rows solve S w_c = mu_c and biases are -mu_c.w_c / 2 + log(1/C) with
    uniform priors. At one shot per class S_pooled is exactly zero, and S is
    inverted in the pseudo-inverse sense, collapsing to the constant
    classifier (chance accuracy). Pass ``allow_singular=False`` to raise
    SingularCovariance instead, which can only happen at zero shrinkage.

    Raises:
        ValidationError: if shrinkage is outside [0, 1].
        SingularCovariance: rank-deficient S at shrinkage 0 when
            ``allow_singular`` is false.
    """
    if not 0.0 <= shrinkage <= 1.0:
        raise ValidationError(f"shrinkage must lie in [0, 1], got {shrinkage}")
    data = fewshot.embeddings.data
    n, d = data.shape
    n_classes = fewshot.n_classes
    means = _class_means(fewshot)
    centered = data - means[fewshot.labels]
    pooled = centered.T @ centered / max(n - n_classes, 1)
    shared = (1.0 - shrinkage) * pooled
    shared += shrinkage * (np.trace(pooled) / d) * np.eye(d)

    eigvals, eigvecs = np.linalg.eigh(shared)
    cutoff = max(float(eigvals[-1]), 0.0) * d * np.finfo(np.float64).eps
    invertible = eigvals > cutoff
    if not invertible.all() and not allow_singular and shrinkage == 0.0:
        raise SingularCovariance(
            "pooled covariance is rank-deficient at zero shrinkage"
        )
    inv_eigvals = np.where(invertible, 1.0 / np.where(invertible, eigvals, 1.0), 0.0)
    weights = ((means @ eigvecs) * inv_eigvals) @ eigvecs.T
    biases = -0.5 * np.einsum("cd,cd->c", weights, means) + np.log(1.0 / n_classes)
    return LinearClassifier(weights, biases, ClassifierKind.LDA)


def classify(c: LinearClassifier, test: EmbeddingSet) -> np.ndarray:
    """Argmax class id per test row; ties go to the lowest class id.

    Prototype and zero-shot kinds score by cosine (test rows normalized),
    the discriminant kind by its affine score on the raw rows.
    """
    if test.dim != c.weights.shape[1]:
        raise DimensionMismatch(
            f"test dimension {test.dim} != classifier dimension {c.weights.shape[1]}"
        )
    if c.kind in (ClassifierKind.PROTOTYPE, ClassifierKind.ZERO_SHOT_TEXT):
        base = test if test.normalized else normalize_rows(test)
        scores = base.data @ c.weights.T + c.biases
    else:
        scores = test.data @ c.weights.T + c.biases
    return np.argmax(scores, axis=1)


def split_few_shot(
    pool: LabeledEmbeddingSet, shots: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded balanced split: ``shots`` row indices per class, remainder.

    The draw depends only on the pool labels and the seed, so every
    classifier evaluated at a given seed sees the same shots.

    Raises:
        EmptyClass: if any class has no held-out rows left.
    """
    if shots < 1:
        raise ValidationError(f"shots must be at least 1, got {shots}")
    rng = rng_from_seed(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for c in range(pool.n_classes):
        members = np.flatnonzero(pool.labels == c)
        if members.size <= shots:
            raise EmptyClass(
                f"class {c} has {members.size} rows; need more than {shots} "
                "to hold out a test split"
            )
        picked = np.sort(rng.choice(members, size=shots, replace=False))
        train_parts.append(picked)
        test_parts.append(np.setdiff1d(members, picked))
    return np.concatenate(train_parts), np.concatenate(test_parts)


def subset(pool: LabeledEmbeddingSet, rows: np.ndarray) -> LabeledEmbeddingSet:
    """Labeled subset of ``pool`` at the given row indices."""
    emb = EmbeddingSet(
        pool.embeddings.data[rows],
        modality=pool.embeddings.modality,
        normalized=pool.embeddings.normalized,
    )
    return LabeledEmbeddingSet(emb, pool.labels[rows])


def fewshot_accuracy(
    pool: LabeledEmbeddingSet,
    shots: int,
    seed: int,
    builder: Callable[[LabeledEmbeddingSet], LinearClassifier],
) -> float:
    """Accuracy of ``builder``'s classifier on the seeded held-out split."""
    train_rows, test_rows = split_few_shot(pool, shots, seed)
    clf = builder(subset(pool, train_rows))
    test = EmbeddingSet(
        pool.embeddings.data[test_rows],
        modality=pool.embeddings.modality,
        normalized=pool.embeddings.normalized,
    )
    predictions = classify(clf, test)
    return float(np.mean(predictions == pool.labels[test_rows]))
