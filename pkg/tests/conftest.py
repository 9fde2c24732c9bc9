import numpy as np

from embedgeo import EmbeddingSet, Modality
from embedgeo.seeding import rng_from_seed


def unit_rows(seed: int, n: int, d: int) -> np.ndarray:
    """Random unit row vectors, deterministic per seed."""
    raw = rng_from_seed(seed).standard_normal((n, d))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def unit_set(seed: int, n: int, d: int, modality: Modality = Modality.IMAGE) -> EmbeddingSet:
    return EmbeddingSet(unit_rows(seed, n, d), modality=modality, normalized=True)
