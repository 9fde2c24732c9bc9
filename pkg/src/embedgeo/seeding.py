"""Deterministic random streams.

All randomness in the toolkit flows through Philox4x64, a counter-based
generator with an implementation-independent definition, keyed directly by
a 64-bit seed. Outputs are therefore bit-reproducible across runs,
platforms, and reimplementations. Pipeline stages derive their own sub-seed
by hashing a textual label together with the master seed, so adding a stage
never shifts another stage's draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def rng_from_seed(seed: int) -> np.random.Generator:
    """Philox generator keyed by the low 64 bits of ``seed``."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit sub-seed for the pipeline stage named ``label``."""
    digest = hashlib.sha256(f"{seed & _MASK64}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
