"""Alignment-indicator statistics: paired similarity histograms and the
modality-gap magnitude.

Histograms are binned over the fixed range [-1, 1] so results from
different models share a binning; the overlap statistic is the histogram
intersection of the two per-side densities. Pairs are sampled uniformly
without replacement, capped per side, with every draw determined by the
seed alone. Similarity evaluation is chunked with fixed boundaries, so the
worker count never changes the result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSet, LabeledEmbeddingSet, normalize_rows
from .errors import DimensionMismatch, InsufficientClassData, ValidationError
from .seeding import rng_from_seed

DEFAULT_BINS = 100
DEFAULT_MAX_PAIRS = 1_000_000
_CHUNK = 16384


@dataclass(frozen=True, eq=False)
class HistogramPair:
    """Two count/density histograms over shared bin edges, their overlap,
    and the per-side sample moments."""

    bin_edges: np.ndarray
    counts_a: np.ndarray
    counts_b: np.ndarray
    density_a: np.ndarray
    density_b: np.ndarray
    overlap: float
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float

    def __post_init__(self) -> None:
        edges = np.array(self.bin_edges, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValidationError("bin edges must be strictly ascending")
        b = edges.size - 1
        arrays = {"bin_edges": edges}
        for name in ("counts_a", "counts_b"):
            counts = np.array(getattr(self, name), dtype=np.int64)
            if counts.shape != (b,) or int(counts.min()) < 0:
                raise ValidationError(f"{name} must be {b} non-negative integers")
            arrays[name] = counts
        for name in ("density_a", "density_b"):
            dens = np.array(getattr(self, name), dtype=np.float64)
            if dens.shape != (b,) or float(dens.min()) < 0:
                raise ValidationError(f"{name} must be {b} non-negative reals")
            if abs(float(dens.sum()) - 1.0) > 1e-9:
                raise ValidationError(f"{name} must sum to 1")
            arrays[name] = dens
        if not 0.0 <= self.overlap <= 1.0 + 1e-12:
            raise ValidationError(f"overlap {self.overlap} outside [0, 1]")
        recomputed = histogram_overlap(arrays["density_a"], arrays["density_b"])
        if abs(recomputed - self.overlap) > 1e-12:
            raise ValidationError("overlap is inconsistent with the densities")
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def bins(self) -> int:
        return self.bin_edges.size - 1


def histogram_overlap(density_a: np.ndarray, density_b: np.ndarray) -> float:
    """Histogram intersection: sum of per-bin minima of two densities."""
    return float(np.minimum(density_a, density_b).sum())


def _pair_offsets(n: int) -> np.ndarray:
    # start code of row i in the lexicographic enumeration of pairs i < j
    i = np.arange(n, dtype=np.int64)
    return i * (2 * n - i - 1) // 2


def _decode_tri(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pair codes -> (i, j) with i < j, lexicographic order."""
    offsets = _pair_offsets(n)
    i = np.searchsorted(offsets, codes, side="right") - 1
    j = codes - offsets[i] + i + 1
    return i, j


def _sample_codes(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    """``count`` distinct uniform codes from range(total), in draw order."""
    if count >= total:
        return np.arange(total, dtype=np.int64)
    if total <= max(4 * count, 1 << 20):
        return rng.permutation(total)[:count].astype(np.int64)
    out = np.empty(0, dtype=np.int64)
    while out.size < count:
        need = count - out.size
        draw = rng.integers(0, total, size=need + need // 3 + 16, dtype=np.int64)
        merged = np.concatenate([out, draw])
        _, first = np.unique(merged, return_index=True)
        out = merged[np.sort(first)]
    return out[:count]


def _pair_dots(
    left: np.ndarray,
    right: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
    workers: int | None = None,
) -> np.ndarray:
    """Dot products left[ii[k]] . right[jj[k]], evaluated in fixed chunks.

    Chunk boundaries do not depend on the worker count, so the result is
    bit-identical for any parallelism.
    """
    m = ii.size
    spans = [(s, min(s + _CHUNK, m)) for s in range(0, m, _CHUNK)]

    def run(span: tuple[int, int]) -> np.ndarray:
        s, e = span
        return np.einsum("ij,ij->i", left[ii[s:e]], right[jj[s:e]])

    if workers and workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(span) for span in spans]
    sims = np.concatenate(parts)
    return np.clip(sims, -1.0, 1.0)


def _build_pair(sims_a: np.ndarray, sims_b: np.ndarray, bins: int) -> HistogramPair:
    if bins < 1:
        raise ValidationError(f"bins must be at least 1, got {bins}")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts_a, _ = np.histogram(sims_a, bins=edges)
    counts_b, _ = np.histogram(sims_b, bins=edges)
    density_a = counts_a / counts_a.sum()
    density_b = counts_b / counts_b.sum()
    return HistogramPair(
        bin_edges=edges,
        counts_a=counts_a,
        counts_b=counts_b,
        density_a=density_a,
        density_b=density_b,
        overlap=histogram_overlap(density_a, density_b),
        mean_a=float(sims_a.mean()),
        std_a=float(sims_a.std()),
        mean_b=float(sims_b.mean()),
        std_b=float(sims_b.std()),
    )


def _class_rows(labels: np.ndarray, n_classes: int) -> list[np.ndarray]:
    return [np.flatnonzero(labels == c) for c in range(n_classes)]


def _same_class_pairs(
    rng: np.random.Generator, rows: list[np.ndarray], max_pairs: int
) -> tuple[np.ndarray, np.ndarray]:
    per_class = np.array([r.size * (r.size - 1) // 2 for r in rows], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(per_class)])
    total = int(starts[-1])
    codes = _sample_codes(rng, total, min(total, max_pairs))
    cls = np.searchsorted(starts, codes, side="right") - 1
    ii = np.empty(codes.size, dtype=np.int64)
    jj = np.empty(codes.size, dtype=np.int64)
    for c, members in enumerate(rows):
        mask = cls == c
        if not mask.any():
            continue
        li, lj = _decode_tri(codes[mask] - starts[c], members.size)
        ii[mask] = members[li]
        jj[mask] = members[lj]
    return ii, jj


def _diff_class_pairs(
    rng: np.random.Generator, labels: np.ndarray, total_same: int, max_pairs: int
) -> tuple[np.ndarray, np.ndarray]:
    n = labels.size
    total_all = n * (n - 1) // 2
    total_diff = total_all - total_same
    if total_diff <= max_pairs:
        # enumerate every pair in bounded chunks and keep the cross-class ones
        parts_i, parts_j = [], []
        step = 1 << 21
        for start in range(0, total_all, step):
            codes = np.arange(start, min(start + step, total_all), dtype=np.int64)
            di, dj = _decode_tri(codes, n)
            mask = labels[di] != labels[dj]
            parts_i.append(di[mask])
            parts_j.append(dj[mask])
        return np.concatenate(parts_i), np.concatenate(parts_j)
    out = np.empty(0, dtype=np.int64)
    while out.size < max_pairs:
        need = max_pairs - out.size
        draw = rng.integers(0, total_all, size=need + need // 2 + 16, dtype=np.int64)
        di, dj = _decode_tri(draw, n)
        draw = draw[labels[di] != labels[dj]]
        merged = np.concatenate([out, draw])
        _, first = np.unique(merged, return_index=True)
        out = merged[np.sort(first)]
    return _decode_tri(out[:max_pairs], n)


def class_pair_histograms(
    ds: LabeledEmbeddingSet,
    bins: int = DEFAULT_BINS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    seed: int = 0,
    workers: int | None = None,
) -> HistogramPair:
    """Same-class (side a) vs different-class (side b) similarity histograms.

    Up to ``max_pairs`` pairs per side are drawn uniformly without
    replacement from the seeded stream; side a draws precede side b, so
    results are reproducible for a given seed regardless of ``workers``.

    Raises:
        InsufficientClassData: with fewer than 2 classes or any class
            smaller than 2 rows.
    """
    n_classes = ds.n_classes
    if n_classes < 2:
        raise InsufficientClassData(f"need at least 2 classes, got {n_classes}")
    counts = np.bincount(ds.labels, minlength=n_classes)
    if int(counts.min()) < 2:
        small = int(np.argmin(counts))
        raise InsufficientClassData(
            f"every class needs at least 2 rows; class {small} has {int(counts[small])}"
        )
    emb = ds.embeddings if ds.embeddings.normalized else normalize_rows(ds.embeddings)
    rows = _class_rows(ds.labels, n_classes)
    total_same = sum(r.size * (r.size - 1) // 2 for r in rows)
    rng = rng_from_seed(seed)
    si, sj = _same_class_pairs(rng, rows, max_pairs)
    di, dj = _diff_class_pairs(rng, ds.labels, total_same, max_pairs)
    sims_same = _pair_dots(emb.data, emb.data, si, sj, workers)
    sims_diff = _pair_dots(emb.data, emb.data, di, dj, workers)
    return _build_pair(sims_same, sims_diff, bins)


def modality_pair_histograms(
    images: EmbeddingSet,
    texts: EmbeddingSet,
    bins: int = DEFAULT_BINS,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    seed: int = 0,
    workers: int | None = None,
) -> HistogramPair:
    """Image-image (side a) vs image-text (side b) similarity histograms.

    Side a samples unordered image pairs; side b samples the full
    image x text grid. Sampling and chunking rules match
    :func:`class_pair_histograms`.
    """
    if images.dim != texts.dim:
        raise DimensionMismatch(f"embedding dimensions differ: {images.dim} vs {texts.dim}")
    if images.n < 2:
        raise ValidationError("need at least 2 image rows for intra-modal pairs")
    img = images if images.normalized else normalize_rows(images)
    txt = texts if texts.normalized else normalize_rows(texts)
    rng = rng_from_seed(seed)
    total_ii = images.n * (images.n - 1) // 2
    codes_ii = _sample_codes(rng, total_ii, min(total_ii, max_pairs))
    ii, jj = _decode_tri(codes_ii, images.n)
    total_it = images.n * texts.n
    codes_it = _sample_codes(rng, total_it, min(total_it, max_pairs))
    qi, tj = codes_it // texts.n, codes_it % texts.n
    sims_ii = _pair_dots(img.data, img.data, ii, jj, workers)
    sims_it = _pair_dots(img.data, txt.data, qi, tj, workers)
    return _build_pair(sims_ii, sims_it, bins)


def modality_gap(images: EmbeddingSet, texts: EmbeddingSet) -> float:
    """Euclidean distance between the normalized sets' centroids."""
    if images.dim != texts.dim:
        raise DimensionMismatch(f"embedding dimensions differ: {images.dim} vs {texts.dim}")
    img = images if images.normalized else normalize_rows(images)
    txt = texts if texts.normalized else normalize_rows(texts)
    return float(np.linalg.norm(img.data.mean(axis=0) - txt.data.mean(axis=0)))
