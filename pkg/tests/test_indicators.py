import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import unit_set
from embedgeo import (
    ConeSpec,
    EmbeddingSet,
    LabeledEmbeddingSet,
    Modality,
    class_pair_histograms,
    generate_labeled,
    generate_modality_pair,
    histogram_overlap,
    modality_gap,
    modality_pair_histograms,
)
from embedgeo.errors import DimensionMismatch, InsufficientClassData
from embedgeo.indicators import _decode_tri, _sample_codes
from embedgeo.seeding import rng_from_seed


def _axis_set(rows):
    return EmbeddingSet(np.array(rows, dtype=float), normalized=True)


def test_separated_classes_have_zero_overlap():
    emb = _axis_set([[1, 0], [1, 0], [0, 1], [0, 1]])
    ds = LabeledEmbeddingSet(emb, [0, 0, 1, 1])
    pair = class_pair_histograms(ds, bins=100, seed=0)
    assert pair.overlap == 0.0
    assert pair.mean_a == 1.0
    assert pair.mean_b == 0.0
    assert pair.counts_a.sum() == 2  # one same-class pair per class
    assert pair.counts_b.sum() == 4  # all cross-class pairs


def test_indistinguishable_classes_have_full_overlap():
    emb = _axis_set([[1, 0]] * 6)
    ds = LabeledEmbeddingSet(emb, [0, 0, 0, 1, 1, 1])
    pair = class_pair_histograms(ds, bins=100, seed=0)
    assert pair.overlap == 1.0


def test_overlap_shrinks_with_tighter_classes():
    overlaps = []
    for spread in (0.5, 0.25, 0.1):
        ds = generate_labeled(
            ConeSpec(dim=8, n_classes=6, per_class=30, class_spread=spread, seed=42)
        )
        overlaps.append(class_pair_histograms(ds, seed=7).overlap)
    assert overlaps[0] > overlaps[1] > overlaps[2]


def test_modality_identical_rows_full_overlap():
    images = _axis_set([[1, 0]] * 4)
    texts = _axis_set([[1, 0]] * 4)
    pair = modality_pair_histograms(images, texts, seed=0)
    assert pair.overlap == 1.0
    assert pair.mean_a == pair.mean_b == 1.0


def test_modality_opposite_cones_zero_overlap():
    images = _axis_set([[1, 0]] * 3)
    texts = _axis_set([[-1, 0]] * 3)
    pair = modality_pair_histograms(images, texts, seed=0)
    assert pair.overlap == 0.0
    assert pair.mean_a == 1.0
    assert pair.mean_b == -1.0


def test_two_cone_geometry_orders_means():
    offset = np.zeros(6)
    offset[0] = 2.0
    images, texts, _ = generate_modality_pair(
        ConeSpec(dim=6, n_classes=2, per_class=30, class_spread=0.2,
                 modality_offset=offset, seed=9)
    )
    pair = modality_pair_histograms(images, texts, seed=3)
    assert pair.mean_a > pair.mean_b


def test_gap_identical_sets_is_zero():
    e = unit_set(0, 5, 4)
    assert modality_gap(e, e) == 0.0


def test_gap_orthogonal_axes():
    images = _axis_set([[1, 0], [1, 0]])
    texts = _axis_set([[0, 1], [0, 1]])
    assert abs(modality_gap(images, texts) - np.sqrt(2.0)) <= 1e-12


def test_gap_matches_direct_computation():
    images = unit_set(5, 40, 6)
    texts = unit_set(6, 30, 6, Modality.TEXT)
    expected = np.linalg.norm(images.data.mean(axis=0) - texts.data.mean(axis=0))
    assert abs(modality_gap(images, texts) - expected) <= 1e-15


def test_gap_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        modality_gap(unit_set(0, 3, 4), unit_set(1, 3, 5))


def test_fixed_seed_is_deterministic():
    ds = generate_labeled(ConeSpec(dim=6, n_classes=4, per_class=25, class_spread=0.3, seed=1))
    a = class_pair_histograms(ds, max_pairs=200, seed=5)
    b = class_pair_histograms(ds, max_pairs=200, seed=5)
    assert np.array_equal(a.counts_a, b.counts_a)
    assert np.array_equal(a.counts_b, b.counts_b)
    assert a.overlap == b.overlap


def test_worker_count_does_not_change_results():
    # enough rows that similarity evaluation spans several chunks
    ds = generate_labeled(ConeSpec(dim=6, n_classes=4, per_class=150, class_spread=0.3, seed=2))
    a = class_pair_histograms(ds, seed=5, workers=1)
    b = class_pair_histograms(ds, seed=5, workers=4)
    assert np.array_equal(a.counts_a, b.counts_a)
    assert np.array_equal(a.density_a, b.density_a)
    assert np.array_equal(a.density_b, b.density_b)


def test_refining_bins_never_increases_overlap():
    ds = generate_labeled(ConeSpec(dim=8, n_classes=5, per_class=30, class_spread=0.35, seed=3))
    overlaps = {
        bins: class_pair_histograms(ds, bins=bins, seed=11).overlap
        for bins in (50, 100, 200)
    }
    assert overlaps[100] <= overlaps[50] + 1e-12
    assert overlaps[200] <= overlaps[100] + 1e-12


def test_histograms_cover_all_samples():
    # every sampled similarity lands inside [-1, 1], so counts account for
    # every sampled pair
    images, texts, _ = generate_modality_pair(
        ConeSpec(dim=5, n_classes=3, per_class=10, class_spread=0.4, seed=8)
    )
    pair = modality_pair_histograms(images, texts, max_pairs=100, seed=2)
    assert pair.counts_a.sum() == 100
    assert pair.counts_b.sum() == 100


def test_requires_two_classes():
    ds = generate_labeled(ConeSpec(dim=4, n_classes=1, per_class=8, class_spread=0.2, seed=0))
    with pytest.raises(InsufficientClassData):
        class_pair_histograms(ds)


def test_requires_two_rows_per_class():
    emb = _axis_set([[1, 0], [0, 1], [0, 1]])
    ds = LabeledEmbeddingSet(emb, [0, 1, 1])
    with pytest.raises(InsufficientClassData):
        class_pair_histograms(ds)


@given(
    hnp.arrays(np.float64, 20, elements=st.floats(0.0, 1.0)),
    hnp.arrays(np.float64, 20, elements=st.floats(0.0, 1.0)),
)
@settings(max_examples=100)
def test_overlap_symmetric_and_bounded(raw_a, raw_b):
    assume(raw_a.sum() > 0 and raw_b.sum() > 0)
    da, db = raw_a / raw_a.sum(), raw_b / raw_b.sum()
    assert histogram_overlap(da, db) == histogram_overlap(db, da)
    assert 0.0 <= histogram_overlap(da, db) <= 1.0 + 1e-12


def test_decode_tri_matches_enumeration():
    n = 7
    codes = np.arange(n * (n - 1) // 2)
    ii, jj = _decode_tri(codes, n)
    assert list(zip(ii.tolist(), jj.tolist())) == list(itertools.combinations(range(n), 2))


def test_sample_codes_distinct_and_in_range():
    rng = rng_from_seed(0)
    codes = _sample_codes(rng, 10_000_000_000, 5000)
    assert np.unique(codes).size == 5000
    assert codes.min() >= 0 and codes.max() < 10_000_000_000


def test_sample_codes_returns_all_when_exhausted():
    rng = rng_from_seed(0)
    assert np.array_equal(_sample_codes(rng, 10, 15), np.arange(10))


def test_sampled_pairs_respect_class_sides():
    ds = generate_labeled(ConeSpec(dim=5, n_classes=3, per_class=20, class_spread=0.3, seed=4))
    pair = class_pair_histograms(ds, max_pairs=50, seed=9)
    assert pair.counts_a.sum() == 50
    assert pair.counts_b.sum() == 50
    # same-class similarities concentrate higher than cross-class ones
    assert pair.mean_a > pair.mean_b
