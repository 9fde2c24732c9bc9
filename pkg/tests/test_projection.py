import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from conftest import unit_rows, unit_set
from embedgeo import (
    EmbeddingSet,
    PrincipalProjector,
    cosine_matrix,
    fit_class_axes,
    project,
    projected_similarity,
)
from embedgeo.errors import DimensionMismatch, TooFewRows, ValidationError, ZeroRow


def _axis_projector(keep):
    keep = np.asarray(keep, dtype=float)
    d = keep.size
    eigenvalues = np.linspace(1.0, 0.5, d)
    return PrincipalProjector(
        basis=np.eye(d), keep=keep, mean=np.zeros(d), eigenvalues=eigenvalues
    )


def test_fit_single_variance_axis():
    rows = EmbeddingSet([[1.0, 0.0], [-1.0, 0.0]], normalized=True)
    proj = fit_class_axes(rows, keep_count=1)
    assert np.array_equal(proj.keep, [1.0, 0.0])
    assert abs(abs(proj.basis[0, 0]) - 1.0) <= 1e-12
    assert abs(proj.basis[1, 0]) <= 1e-12


def test_fit_isotropic_keep_all_is_identity():
    rows = EmbeddingSet(
        [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], normalized=True
    )
    proj = fit_class_axes(rows, keep_count=2)
    x = unit_set(1, 5, 2)
    assert np.array_equal(project(x, proj).data, x.data)


def test_default_keep_count_is_half():
    texts = unit_set(0, 20, 9)
    assert fit_class_axes(texts).keep_count == 4


def test_fit_requires_two_rows():
    with pytest.raises(TooFewRows):
        fit_class_axes(unit_set(0, 1, 4))


def test_fit_requires_normalized_rows():
    with pytest.raises(ValidationError):
        fit_class_axes(EmbeddingSet(unit_rows(0, 5, 4) * 2.0))


def test_reconstruction_error_equals_discarded_variance():
    # oracle: eigenvalues recomputed independently from the SVD of the
    # centered data; dropped variance must equal the projection residual
    n, d, keep = 100, 8, 4
    rows = unit_set(33, n, d)
    proj = fit_class_axes(rows, keep_count=keep)

    centered = rows.data - rows.data.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    oracle_eigenvalues = svals**2 / (n - 1)
    assert np.max(np.abs(oracle_eigenvalues - proj.eigenvalues)) <= 1e-10

    centered_proj = ((centered @ proj.basis) * proj.keep) @ proj.basis.T
    residual = np.sum((centered - centered_proj) ** 2)
    assert abs(residual - (n - 1) * proj.eigenvalues[keep:].sum()) <= 1e-9


def test_keep_all_is_exact_identity():
    x = unit_set(7, 6, 4)
    out = project(x, _axis_projector([1, 1, 1, 1]))
    assert np.array_equal(out.data, x.data)
    assert out.normalized


def test_axis_cut():
    x = EmbeddingSet([[0.6, 0.8]], normalized=True)
    out = project(x, _axis_projector([1, 0]))
    assert np.allclose(out.data, [[0.6, 0.0]], atol=1e-15)
    assert not out.normalized


def test_mean_adjust_hand_case():
    # with axis-aligned basis and keep [1, 0], the adjustment adds back
    # the dropped coordinate of the supplied mean: [0, 0.5]
    x = EmbeddingSet([[0.6, 0.8]], normalized=True)
    out = project(
        x, _axis_projector([1, 0]), mean_adjust=True, adjust_mean=np.array([0.0, 0.5])
    )
    assert np.allclose(out.data, [[0.6, 0.5]], atol=1e-15)


def test_mean_adjust_defaults_to_set_mean():
    x = unit_set(9, 12, 6)
    proj = fit_class_axes(unit_set(10, 30, 6), keep_count=3)
    adjusted = project(x, proj, mean_adjust=True)
    plain = project(x, proj)
    mu = x.data.mean(axis=0)
    delta = ((mu @ proj.basis) * (1.0 - proj.keep)) @ proj.basis.T
    assert np.max(np.abs(adjusted.data - (plain.data + delta))) <= 1e-12


def test_renormalize_zero_row_raises():
    x = EmbeddingSet([[0.0, 1.0]], normalized=True)
    with pytest.raises(ZeroRow):
        project(x, _axis_projector([1, 0]), renormalize=True)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        project(unit_set(0, 3, 5), _axis_projector([1, 0]))


def test_projected_similarity_identical_inputs():
    x = unit_set(3, 8, 6)
    proj = fit_class_axes(unit_set(4, 20, 6), keep_count=3)
    sim = projected_similarity(x, x, proj)
    assert np.max(np.abs(np.diag(sim.data) - 1.0)) <= 1e-12


def test_projected_similarity_keep_all_equals_plain_cosine():
    x = unit_set(5, 10, 6)
    proj = fit_class_axes(unit_set(6, 20, 6), keep_count=6)
    assert np.max(np.abs(projected_similarity(x, x, proj).data
                         - cosine_matrix(x, x).data)) <= 1e-12


def test_projected_similarity_collapses_mirrored_rows():
    a = EmbeddingSet([[0.6, 0.8]], normalized=True)
    b = EmbeddingSet([[0.6, -0.8]], normalized=True)
    sim = projected_similarity(a, b, _axis_projector([1, 0]))
    assert abs(sim.data[0, 0] - 1.0) <= 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_projection_idempotent(seed):
    x = unit_set(seed, 9, 8)
    proj = fit_class_axes(unit_set(seed + 1, 24, 8), keep_count=3)
    once = project(x, proj)
    twice = project(once, proj)
    assert np.max(np.abs(twice.data - once.data)) <= 1e-10


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25)
def test_basis_change_is_isometric(seed):
    x = unit_set(seed, 10, 7)
    proj = fit_class_axes(unit_set(seed + 1, 21, 7), keep_count=3)
    rotated = x.data @ proj.basis
    assert np.max(np.abs(pdist(rotated) - pdist(x.data))) <= 1e-10


def test_mean_adjustment_preserves_pairwise_distances():
    x = unit_set(12, 60, 8)
    proj = fit_class_axes(unit_set(13, 24, 8), keep_count=4)
    adjusted = project(x, proj, mean_adjust=True)
    plain = project(x, proj)
    assert np.max(np.abs(pdist(adjusted.data) - pdist(plain.data))) <= 1e-10


def test_norm_contraction():
    x = unit_set(14, 25, 8)
    proj = fit_class_axes(unit_set(15, 24, 8), keep_count=4)
    out = project(x, proj)
    assert np.all(np.linalg.norm(out.data, axis=1)
                  <= np.linalg.norm(x.data, axis=1) + 1e-12)


def test_projector_validation():
    with pytest.raises(ValidationError):
        PrincipalProjector(
            basis=np.array([[1.0, 1.0], [0.0, 1.0]]),
            keep=np.array([1.0, 0.0]),
            mean=np.zeros(2),
            eigenvalues=np.array([1.0, 0.5]),
        )
    with pytest.raises(ValidationError):
        PrincipalProjector(
            basis=np.eye(2),
            keep=np.array([0.5, 0.5]),
            mean=np.zeros(2),
            eigenvalues=np.array([1.0, 0.5]),
        )
    with pytest.raises(ValidationError):
        PrincipalProjector(
            basis=np.eye(2),
            keep=np.array([1.0, 0.0]),
            mean=np.zeros(2),
            eigenvalues=np.array([0.5, 1.0]),
        )
