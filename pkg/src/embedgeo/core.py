"""Dense embedding-set and similarity-matrix primitives.

Everything downstream works on three types: a matrix of embedding row
vectors tagged with a modality, the same plus one integer class label per
row, and a matrix of pairwise cosine similarities. All arithmetic runs in
float64 regardless of the precision of ingested files. Ingestion tolerates
32-bit precision loss (row norms within 1e-6 of 1 still count as
normalized), while rows with norm at or below 1e-12 are treated as
degenerate. All types are immutable after construction; the operations are
pure functions and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, EmptyClass, ValidationError, ZeroRow

#: Row-norm slack for sets flagged as normalized (covers f32 quantization).
NORM_TOL = 1e-6
#: At or below this Euclidean norm a row cannot be meaningfully normalized.
ZERO_NORM_TOL = 1e-12
#: Cosine entries may exceed the exact [-1, 1] range by at most this.
SIM_SLACK = 1e-9


class Modality(Enum):
    IMAGE = "image"
    TEXT = "text"


class SimilarityKind(Enum):
    INTER = "inter"
    INTRA = "intra"


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """n x d matrix of embedding row vectors with a modality tag."""

    data: np.ndarray
    modality: Modality = Modality.IMAGE
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"embedding data must be 2-D, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1 or d < 2:
            raise ValidationError(f"need at least 1 row and 2 columns, got {n}x{d}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding data contains non-finite entries")
        if self.normalized:
            dev = float(np.max(np.abs(np.linalg.norm(arr, axis=1) - 1.0)))
            if dev > NORM_TOL:
                raise ValidationError(
                    f"rows flagged normalized deviate from unit norm by {dev:.3e} "
                    f"(tolerance {NORM_TOL:g})"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class LabeledEmbeddingSet:
    """An EmbeddingSet plus one contiguous integer class id per row.

    Class ids run over [0, C) and every id must occur at least once.
    """

    embeddings: EmbeddingSet
    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.array(self.labels, dtype=np.int64)
        if lab.ndim != 1 or lab.shape[0] != self.embeddings.n:
            raise ValidationError(
                f"labels must be one id per row, got shape {lab.shape} "
                f"for {self.embeddings.n} rows"
            )
        if lab.size and int(lab.min()) < 0:
            raise ValidationError("class ids must be non-negative")
        n_classes = int(lab.max()) + 1
        present = np.unique(lab)
        if present.size != n_classes:
            missing = sorted(set(range(n_classes)) - set(present.tolist()))
            raise EmptyClass(f"class ids {missing} have no rows")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Dense p x q matrix of pairwise cosine similarities.

    Square intra-modal matrices must be symmetric with unit diagonal to
    within 1e-9.
    """

    data: np.ndarray
    kind: SimilarityKind

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"similarity data must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("similarity data contains non-finite entries")
        if arr.size and float(np.max(np.abs(arr))) > 1.0 + SIM_SLACK:
            raise ValidationError(
                f"similarity entries exceed [-1, 1] by more than {SIM_SLACK:g}"
            )
        if self.kind is SimilarityKind.INTRA and arr.shape[0] == arr.shape[1]:
            if float(np.max(np.abs(arr - arr.T))) > SIM_SLACK:
                raise ValidationError("intra-modal similarity matrix is not symmetric")
            if float(np.max(np.abs(np.diagonal(arr) - 1.0))) > SIM_SLACK:
                raise ValidationError(
                    "intra-modal similarity matrix must have a unit diagonal"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def normalize_rows(e: EmbeddingSet) -> EmbeddingSet:
    """Scale every row of ``e`` to unit Euclidean norm.

    Idempotent up to floating-point rounding (within 1e-12).

    Raises:
        ZeroRow: if any row norm is at or below 1e-12.
    """
    norms = np.linalg.norm(e.data, axis=1)
    if np.any(norms <= ZERO_NORM_TOL):
        row = int(np.argmin(norms))
        raise ZeroRow(f"row {row} has norm {norms[row]:.3e}; cannot normalize")
    return EmbeddingSet(e.data / norms[:, None], modality=e.modality, normalized=True)


def cosine_matrix(a: EmbeddingSet, b: EmbeddingSet) -> SimilarityMatrix:
    """Pairwise cosine similarities between rows of ``a`` and rows of ``b``.

    Inputs not flagged normalized are normalized on copies first. The result
    is intra-modal exactly when ``a`` and ``b`` are the same object, in which
    case it is symmetrized so the intra-modal invariants hold to machine
    precision. Entries are clipped to [-1, 1], which only repairs the
    rounding of near-unit ingested rows.

    Raises:
        DimensionMismatch: if the embedding dimensions differ.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"embedding dimensions differ: {a.dim} vs {b.dim}")
    same = a is b
    if not a.normalized:
        a = normalize_rows(a)
    if same:
        b = a
    elif not b.normalized:
        b = normalize_rows(b)
    sims = a.data @ b.data.T
    np.clip(sims, -1.0, 1.0, out=sims)
    if same:
        sims = (sims + sims.T) / 2.0
    kind = SimilarityKind.INTRA if same else SimilarityKind.INTER
    return SimilarityMatrix(sims, kind)
