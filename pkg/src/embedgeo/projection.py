"""Principal-axis projection of embeddings onto class-relevant directions.

A projector is fit on class-name text embeddings: eigenvectors of their
covariance give an orthogonal change of basis, and a binary keep mask
selects the leading axes. Projecting an embedding rotates it into that
basis, zeroes the dropped coordinates, and rotates back; the basis change
is an isometry, so all geometry changes come from the mask alone. Optional
mean adjustment adds back the dropped-axis component of the set mean (a
pure translation that preserves pairwise distances); optional
renormalization returns rows to the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSet, SimilarityMatrix, ZERO_NORM_TOL, cosine_matrix
from .errors import DimensionMismatch, TooFewRows, ValidationError, ZeroRow


@dataclass(frozen=True, eq=False)
class PrincipalProjector:
    """Orthogonal axis basis, keep mask, fit mean, and eigenvalue spectrum.

    ``basis`` columns are eigenvectors sorted by descending eigenvalue;
    ``keep`` is a 0/1 mask over axes; ``mean`` is the mean of the fitting
    rows (used for centering during the fit, not for mean adjustment).
    """

    basis: np.ndarray
    keep: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self) -> None:
        basis = np.array(self.basis, dtype=np.float64)
        keep = np.array(self.keep, dtype=np.float64)
        mean = np.array(self.mean, dtype=np.float64)
        eig = np.array(self.eigenvalues, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ValidationError(f"basis must be square, got shape {basis.shape}")
        d = basis.shape[0]
        ortho_dev = float(np.max(np.abs(basis.T @ basis - np.eye(d))))
        if ortho_dev > 1e-10:
            raise ValidationError(f"basis deviates from orthogonal by {ortho_dev:.3e}")
        if keep.shape != (d,) or not np.all(np.isin(keep, (0.0, 1.0))):
            raise ValidationError("keep must be a d-length mask of zeros and ones")
        if mean.shape != (d,):
            raise ValidationError(f"mean must have shape ({d},), got {mean.shape}")
        if eig.shape != (d,):
            raise ValidationError(f"eigenvalues must have shape ({d},), got {eig.shape}")
        if np.any(np.diff(eig) > 0):
            raise ValidationError("eigenvalues must be non-increasing")
        if float(eig[-1]) < -1e-10:
            raise ValidationError(f"eigenvalue {float(eig[-1]):.3e} below -1e-10")
        for name, arr in (("basis", basis), ("keep", keep), ("mean", mean), ("eigenvalues", eig)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def keep_count(self) -> int:
        return int(self.keep.sum())


def fit_class_axes(class_text: EmbeddingSet, keep_count: int | None = None) -> PrincipalProjector:
    """Fit principal axes to class-name text embeddings.

    Eigendecomposes the mean-centered covariance (1/(n-1) convention) of the
    rows and flags the top ``keep_count`` axes (default floor(d/2)) in the
    keep mask. Inputs must be normalized for consistency with every other
    operation.

    Raises:
        TooFewRows: with fewer than 2 rows.
    """
    if class_text.n < 2:
        raise TooFewRows(f"need at least 2 rows to fit axes, got {class_text.n}")
    if not class_text.normalized:
        raise ValidationError("class axes are fit on normalized embeddings")
    d = class_text.dim
    if keep_count is None:
        keep_count = d // 2
    if not 1 <= keep_count <= d:
        raise ValidationError(f"keep_count must be in [1, {d}], got {keep_count}")
    mean = class_text.data.mean(axis=0)
    centered = class_text.data - mean
    cov = centered.T @ centered / (class_text.n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()
    keep = np.zeros(d)
    keep[:keep_count] = 1.0
    return PrincipalProjector(basis=eigvecs, keep=keep, mean=mean, eigenvalues=eigvals)


def project(
    x: EmbeddingSet,
    p: PrincipalProjector,
    mean_adjust: bool = False,
    renormalize: bool = False,
    adjust_mean: np.ndarray | None = None,
) -> EmbeddingSet:
    """Map every row of ``x`` through the kept principal axes.

    With ``mean_adjust`` the dropped-axis component of the set mean is added
    back to every row before optional renormalization; ``adjust_mean``
    overrides the default mean, which is the mean of ``x``'s own rows. An
    all-ones keep mask is the mathematical identity and returns the input
    data unchanged.

    Raises:
        DimensionMismatch: if dimensions differ.
        ZeroRow: if renormalization meets a (near-)zero projected row.
    """
    if x.dim != p.dim:
        raise DimensionMismatch(f"embedding dimension {x.dim} != projector dimension {p.dim}")
    identity = bool(np.all(p.keep == 1.0))
    if identity:
        out = x.data
    else:
        out = ((x.data @ p.basis) * p.keep) @ p.basis.T
        if mean_adjust:
            if adjust_mean is None:
                mu = x.data.mean(axis=0)
            else:
                mu = np.array(adjust_mean, dtype=np.float64)
                if mu.shape != (p.dim,):
                    raise DimensionMismatch(
                        f"adjust_mean must have shape ({p.dim},), got {mu.shape}"
                    )
            out = out + ((mu @ p.basis) * (1.0 - p.keep)) @ p.basis.T
    if renormalize:
        norms = np.linalg.norm(out, axis=1)
        if np.any(norms <= ZERO_NORM_TOL):
            row = int(np.argmin(norms))
            raise ZeroRow(f"projected row {row} has norm {norms[row]:.3e}; cannot renormalize")
        out = out / norms[:, None]
    normalized = renormalize or (identity and x.normalized)
    return EmbeddingSet(out, modality=x.modality, normalized=normalized)


def projected_similarity(
    a: EmbeddingSet, b: EmbeddingSet, p: PrincipalProjector
) -> SimilarityMatrix:
    """Cosine similarities measured inside the kept principal subspace.

    Both sets are projected without mean adjustment, renormalized, and
    compared; with an all-ones keep mask this equals the plain cosine
    matrix.
    """
    pa = project(a, p, mean_adjust=False, renormalize=True)
    pb = pa if b is a else project(b, p, mean_adjust=False, renormalize=True)
    return cosine_matrix(pa, pb)
