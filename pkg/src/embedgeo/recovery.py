"""Reconstruction of image-image similarities from text-image similarities.

Two independent routes recover the same intra-modal matrix, demonstrating
that the inter-modal similarities leave no freedom in the intra-modal ones:

* anchor route: the text-image similarity rows of d linearly independent
  text embeddings with known coordinates form a d x d linear system whose
  solution is the full image embedding matrix; its Gram matrix is the
  intra-modal similarity.
* anchor-free route: a rank-d SVD of the full text-image matrix fixes the
  image embeddings up to an unknown d x d mixing; requiring every recovered
  embedding to have unit norm gives one linear constraint per image row on
  the d(d+1)/2 free entries of the symmetric mixer, an overdetermined
  system solved in the least-squares sense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    EmbeddingSet,
    Modality,
    NORM_TOL,
    SimilarityKind,
    SimilarityMatrix,
    cosine_matrix,
    normalize_rows,
)
from .errors import (
    DimensionMismatch,
    InfeasibleDiagonal,
    RankDeficient,
    RankExcess,
    SingularAnchors,
    ValidationError,
)

#: Beyond this condition number the anchor solve amplifies ingestion noise
#: past the recovery accuracy contract.
ANCHOR_COND_CAP = 1e8
#: A singular value below RANK_RTOL times the largest counts as zero.
RANK_RTOL = 1e-8
#: Default ceiling on the RMS unit-diagonal residual before the input is
#: declared inconsistent with unit-norm embeddings.
DIAG_TOL = 1e-6
#: Mixer eigenvalues in [EIG_FLOOR, 0) are clamped to zero; anything lower
#: signals genuine infeasibility.
EIG_FLOOR = -1e-8


@dataclass(frozen=True, eq=False)
class AnchorSelection:
    """Distinct row indices into a text embedding set, one per dimension."""

    indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ValidationError("anchor indices must be a non-empty 1-D sequence")
        if int(idx.min()) < 0:
            raise ValidationError("anchor indices must be non-negative")
        if np.unique(idx).size != idx.size:
            raise ValidationError("anchor indices must be distinct")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True, eq=False)
class GramFactorization:
    """Rank-d factorization of a recovered intra-modal similarity matrix.

    ``similarity = basis @ core @ basis.T`` with orthonormal basis columns
    (the top right-singular vectors of the inter-modal matrix) and a
    symmetric positive semidefinite d x d core. ``residual`` is the
    Euclidean norm of the unit-diagonal least-squares residual.
    """

    basis: np.ndarray
    core: np.ndarray
    residual: float
    diag_tol: float = DIAG_TOL

    def __post_init__(self) -> None:
        basis = np.array(self.basis, dtype=np.float64)
        core = np.array(self.core, dtype=np.float64)
        if basis.ndim != 2:
            raise ValidationError("basis must be 2-D")
        d = basis.shape[1]
        if core.shape != (d, d):
            raise ValidationError(f"core must be {d}x{d}, got {core.shape}")
        ortho_dev = float(np.max(np.abs(basis.T @ basis - np.eye(d))))
        if ortho_dev > 1e-8:
            raise ValidationError(f"basis columns deviate from orthonormal by {ortho_dev:.3e}")
        sym_dev = float(np.max(np.abs(core - core.T)))
        if sym_dev > 1e-10:
            raise ValidationError(f"core deviates from symmetric by {sym_dev:.3e}")
        min_eig = float(np.linalg.eigvalsh(core)[0])
        if min_eig < EIG_FLOOR:
            raise ValidationError(f"core has eigenvalue {min_eig:.3e} below {EIG_FLOOR:g}")
        diag = np.einsum("ij,jk,ik->i", basis, core, basis)
        diag_dev = float(np.max(np.abs(diag - 1.0)))
        if diag_dev > self.diag_tol:
            raise ValidationError(
                f"factorization diagonal deviates from one by {diag_dev:.3e} "
                f"(tolerance {self.diag_tol:g})"
            )
        basis.setflags(write=False)
        core.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "core", core)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def select_anchors(text: EmbeddingSet) -> AnchorSelection:
    """Pick d well-conditioned text rows by greedy pivoted-QR selection.

    Deterministic for a given set; callers may instead pass any explicit
    AnchorSelection that meets the condition cap.
    """
    d = text.dim
    if text.n < d:
        raise SingularAnchors(f"need at least {d} text rows to anchor, have {text.n}")
    _, _, pivots = scipy.linalg.qr(text.data.T, mode="economic", pivoting=True)
    return AnchorSelection(np.sort(pivots[:d]))


def recover_image_embeddings(
    s_inter_rows: SimilarityMatrix, anchors: EmbeddingSet
) -> EmbeddingSet:
    """Solve the d x d anchor system for the image embeddings.

    ``anchors`` holds d unit-norm text rows with known coordinates and
    ``s_inter_rows`` their d x n_images block of text-image similarities.
    The returned rows are unit vectors within 1e-6 whenever the
    similarities are consistent with unit-norm embeddings.

    Raises:
        DimensionMismatch: on non-square anchors or mismatched row counts.
        SingularAnchors: if the anchor condition number exceeds 1e8.
        InfeasibleDiagonal: if the solved rows are not unit-norm within 1e-6.
    """
    d = anchors.dim
    if anchors.n != d:
        raise DimensionMismatch(f"anchor matrix must be square, got {anchors.n}x{d}")
    if s_inter_rows.data.shape[0] != d:
        raise DimensionMismatch(
            f"similarity block must have {d} rows, got {s_inter_rows.data.shape[0]}"
        )
    cond = float(np.linalg.cond(anchors.data))
    if not np.isfinite(cond) or cond > ANCHOR_COND_CAP:
        raise SingularAnchors(
            f"anchor condition number {cond:.3e} exceeds cap {ANCHOR_COND_CAP:g}"
        )
    recovered = np.linalg.solve(anchors.data, s_inter_rows.data).T
    dev = float(np.max(np.abs(np.linalg.norm(recovered, axis=1) - 1.0)))
    if dev > NORM_TOL:
        raise InfeasibleDiagonal(
            f"recovered rows deviate from unit norm by {dev:.3e}; the input "
            "similarities are inconsistent with unit-norm embeddings"
        )
    return EmbeddingSet(recovered, modality=Modality.IMAGE, normalized=True)


def recover_intra_anchor(
    s_inter: SimilarityMatrix, text: EmbeddingSet, anchors: AnchorSelection
) -> SimilarityMatrix:
    """Intra-modal similarities as the Gram matrix of anchor-recovered rows.

    ``anchors`` indexes rows of ``text`` (and of ``s_inter``); any valid
    selection yields the same result up to 1e-6.
    """
    if s_inter.data.shape[0] != text.n:
        raise DimensionMismatch(
            f"inter-modal matrix has {s_inter.data.shape[0]} rows for {text.n} text rows"
        )
    idx = anchors.indices
    if idx.size != text.dim:
        raise DimensionMismatch(f"need exactly {text.dim} anchors, got {idx.size}")
    if int(idx.max()) >= text.n:
        raise ValidationError(
            f"anchor index {int(idx.max())} out of range for {text.n} text rows"
        )
    if not text.normalized:
        text = normalize_rows(text)
    anchor_set = EmbeddingSet(text.data[idx], modality=Modality.TEXT, normalized=True)
    rows = SimilarityMatrix(s_inter.data[idx], SimilarityKind.INTER)
    recovered = normalize_rows(recover_image_embeddings(rows, anchor_set))
    return cosine_matrix(recovered, recovered)


def recover_intra_anchorfree(
    s_inter: SimilarityMatrix,
    d: int,
    *,
    rank_rtol: float = RANK_RTOL,
    diag_tol: float = DIAG_TOL,
) -> tuple[SimilarityMatrix, GramFactorization]:
    """Intra-modal similarities from the inter-modal matrix alone.

    Takes the top-d right-singular vectors of ``s_inter`` as a basis for the
    image-embedding rows, then solves the overdetermined unit-diagonal
    system (one equation per image row, d(d+1)/2 unknowns) for the symmetric
    mixer in the least-squares sense. Mixer eigenvalues in [-1e-8, 0) are
    clamped to zero to absorb ingestion noise.

    Raises:
        RankDeficient / RankExcess: if the numerical rank of ``s_inter``
            (singular values above ``rank_rtol`` times the largest) is not d.
        ValidationError: with fewer image rows than the d(d+1)/2 unknowns;
            the constraints then leave the mixer genuinely underdetermined
            and any solution would be arbitrary.
        InfeasibleDiagonal: if the RMS residual exceeds ``diag_tol`` or the
            mixer is indefinite beyond clamping; the input was not generated
            by unit-norm embeddings.
    """
    data = s_inter.data
    n_texts, n_images = data.shape
    if d < 1:
        raise ValidationError(f"rank must be at least 1, got {d}")
    if min(n_texts, n_images) < d:
        raise RankDeficient(f"a {n_texts}x{n_images} matrix cannot have rank {d}")
    _, svals, vt = np.linalg.svd(data, full_matrices=False)
    if svals[0] <= 0.0:
        raise RankDeficient("inter-modal matrix is zero")
    rank = int(np.count_nonzero(svals > rank_rtol * svals[0]))
    if rank < d:
        raise RankDeficient(f"numerical rank {rank} is below the requested {d}")
    if rank > d:
        raise RankExcess(f"numerical rank {rank} exceeds the requested {d}")
    basis = vt[:d].T

    unknowns = d * (d + 1) // 2
    if n_images < unknowns:
        raise ValidationError(
            f"unit-diagonal system is underdetermined: {n_images} image rows "
            f"for {unknowns} mixer unknowns; need more than d(d+1)/2 rows"
        )

    # one unit-diagonal equation per image row; off-diagonal mixer entries
    # appear twice in each quadratic form, hence the factor 2
    ju, ku = np.triu_indices(d)
    coeff = basis[:, ju] * basis[:, ku]
    coeff[:, ju != ku] *= 2.0
    rhs = np.ones(n_images)
    x = np.linalg.lstsq(coeff, rhs, rcond=None)[0]
    residual = float(np.linalg.norm(coeff @ x - rhs))
    rms = residual / np.sqrt(n_images)
    if rms > diag_tol:
        raise InfeasibleDiagonal(
            f"unit-diagonal RMS residual {rms:.3e} exceeds {diag_tol:g}; the "
            "input similarities are inconsistent with unit-norm embeddings"
        )

    core = np.zeros((d, d))
    core[ju, ku] = x
    core[ku, ju] = x
    eigvals, eigvecs = np.linalg.eigh(core)
    if eigvals[0] < EIG_FLOOR:
        raise InfeasibleDiagonal(
            f"mixer has eigenvalue {eigvals[0]:.3e} below {EIG_FLOOR:g}; the "
            "input similarities admit no positive semidefinite factorization"
        )
    core = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    core = (core + core.T) / 2.0

    intra = basis @ core @ basis.T
    diag_dev = float(np.max(np.abs(np.diagonal(intra) - 1.0)))
    if diag_dev > diag_tol:
        raise InfeasibleDiagonal(
            f"recovered diagonal deviates from one by {diag_dev:.3e} after "
            f"semidefinite repair (tolerance {diag_tol:g})"
        )
    intra = (intra + intra.T) / 2.0
    np.fill_diagonal(intra, 1.0)
    np.clip(intra, -1.0, 1.0, out=intra)
    fact = GramFactorization(basis=basis, core=core, residual=residual, diag_tol=diag_tol)
    return SimilarityMatrix(intra, SimilarityKind.INTRA), fact
