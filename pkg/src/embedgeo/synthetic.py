"""Seeded generators of ground-truth embedding geometries.

Produces class-structured unit-vector clusters on the sphere and paired
image/text two-cone configurations whose exact text-image similarity matrix
is returned alongside, so downstream recovery, indicator, and task code can
be checked against known ground truth. Sampling is Gaussian perturbation of
a class center followed by renormalization; all draws come from a Philox
stream keyed by the spec seed and are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    EmbeddingSet,
    LabeledEmbeddingSet,
    Modality,
    SimilarityMatrix,
    ZERO_NORM_TOL,
    cosine_matrix,
)
from .errors import ValidationError
from .seeding import rng_from_seed


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """Parameters of a synthetic class-cluster geometry.

    ``class_spread`` scales the Gaussian angular noise around each class
    center; ``modality_offset`` (a d-vector) is added to text samples before
    renormalization, displacing the text cone from the image cone.
    """

    dim: int
    n_classes: int
    per_class: int
    class_spread: float = 0.0
    modality_offset: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValidationError(f"dim must be at least 2, got {self.dim}")
        if self.n_classes < 1:
            raise ValidationError(f"n_classes must be at least 1, got {self.n_classes}")
        if self.per_class < 1:
            raise ValidationError(f"per_class must be at least 1, got {self.per_class}")
        if self.class_spread < 0:
            raise ValidationError(f"class_spread must be >= 0, got {self.class_spread}")
        if self.modality_offset is not None:
            off = np.array(self.modality_offset, dtype=np.float64)
            if off.shape != (self.dim,):
                raise ValidationError(
                    f"modality_offset must have shape ({self.dim},), got {off.shape}"
                )
            if not np.all(np.isfinite(off)):
                raise ValidationError("modality_offset contains non-finite entries")
            off.setflags(write=False)
            object.__setattr__(self, "modality_offset", off)

    @property
    def n(self) -> int:
        return self.n_classes * self.per_class

    def offset_vector(self) -> np.ndarray:
        if self.modality_offset is None:
            return np.zeros(self.dim)
        return np.asarray(self.modality_offset)


def cone_labels(spec: ConeSpec) -> np.ndarray:
    """Class id per generated row: ``per_class`` consecutive rows per class."""
    return np.repeat(np.arange(spec.n_classes, dtype=np.int64), spec.per_class)


def _unit_rows(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms <= ZERO_NORM_TOL):
        raise ValidationError("degenerate draw produced a (near-)zero row")
    return raw / norms[:, None]


def generate_labeled(spec: ConeSpec) -> LabeledEmbeddingSet:
    """Unit-norm class clusters with labels, deterministic per seed.

    Class centers are drawn uniformly on the sphere; each sample is
    ``normalize(center + class_spread * gaussian)``. At spread 0 every
    sample equals its class center bit-for-bit.
    """
    rng = rng_from_seed(spec.seed)
    centers = _unit_rows(rng.standard_normal((spec.n_classes, spec.dim)))
    labels = cone_labels(spec)
    noise = rng.standard_normal((spec.n, spec.dim))
    if spec.class_spread == 0:
        data = centers[labels]
    else:
        data = _unit_rows(centers[labels] + spec.class_spread * noise)
    emb = EmbeddingSet(data, modality=Modality.IMAGE, normalized=True)
    return LabeledEmbeddingSet(emb, labels)


def generate_modality_pair(
    spec: ConeSpec,
) -> tuple[EmbeddingSet, EmbeddingSet, SimilarityMatrix]:
    """Paired image/text sets sharing class centers, plus exact similarities.

    Image and text samples perturb the same class centers with independent
    noise; text samples are additionally displaced by the modality offset
    before renormalization. Returns ``(images, texts, s_inter)`` where
    ``s_inter`` is the exact n_texts x n_images cosine matrix. With spread 0
    and zero offset the two sets coincide bit-for-bit.
    """
    if spec.dim >= spec.n:
        raise ValidationError(
            f"need dim < rows per modality for a rank-{spec.dim} instance, "
            f"got dim={spec.dim}, rows={spec.n}"
        )
    rng = rng_from_seed(spec.seed)
    centers = _unit_rows(rng.standard_normal((spec.n_classes, spec.dim)))
    labels = cone_labels(spec)
    img_noise = rng.standard_normal((spec.n, spec.dim))
    txt_noise = rng.standard_normal((spec.n, spec.dim))
    offset = spec.offset_vector()

    if spec.class_spread == 0:
        img_data = centers[labels]
    else:
        img_data = _unit_rows(centers[labels] + spec.class_spread * img_noise)
    if spec.class_spread == 0 and not np.any(offset):
        txt_data = centers[labels]
    else:
        txt_data = _unit_rows(centers[labels] + spec.class_spread * txt_noise + offset)

    images = EmbeddingSet(img_data, modality=Modality.IMAGE, normalized=True)
    texts = EmbeddingSet(txt_data, modality=Modality.TEXT, normalized=True)
    s_inter = cosine_matrix(texts, images)
    return images, texts, s_inter
