"""Exception types shared across the toolkit.

Every exception class doubles as a stable machine-readable error category:
the CLI reports ``type(exc).__name__`` on failure, so renaming a class is a
breaking change.
"""


class EmbedGeoError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EmbedGeoError):
    """An input violates a documented invariant or precondition."""


# geometry
class ZeroRow(EmbedGeoError):
    """A row with (near-)zero norm cannot be normalized."""


class DimensionMismatch(EmbedGeoError):
    """Operands disagree on the embedding dimension."""


# recovery
class SingularAnchors(EmbedGeoError):
    """The anchor submatrix is too ill-conditioned to solve against."""


class RankDeficient(EmbedGeoError):
    """The inter-modal matrix has numerical rank below the requested one."""


class RankExcess(EmbedGeoError):
    """The inter-modal matrix has numerical rank above the requested one."""


class InfeasibleDiagonal(EmbedGeoError):
    """No unit-diagonal Gram matrix is consistent with the input; the
    similarities were not generated by unit-norm embeddings."""


# projection
class TooFewRows(EmbedGeoError):
    """Not enough rows to fit principal axes."""


# indicators
class InsufficientClassData(EmbedGeoError):
    """Histogram pairs need at least two classes with two rows each."""


# tasks
class ShapeMismatch(EmbedGeoError):
    """A similarity matrix does not match the query/gallery sizes."""


class NoRelevant(EmbedGeoError):
    """Every retrieval query lacks relevant gallery items."""


class EmptyClass(EmbedGeoError):
    """A declared class has no rows (or too few for the requested split)."""


class SingularCovariance(EmbedGeoError):
    """Pooled covariance is rank-deficient at zero shrinkage."""


# file I/O
class BadHeader(EmbedGeoError):
    """An embedding or label file header is malformed or inconsistent."""


class TruncatedPayload(EmbedGeoError):
    """An embedding file payload is shorter than its header declares."""


class NonFiniteValue(EmbedGeoError):
    """An embedding file carries NaN or infinite entries."""


class MissingIndex(EmbedGeoError):
    """A label file does not cover every row index exactly once."""


class DuplicateIndex(EmbedGeoError):
    """A label file lists some row index more than once."""
