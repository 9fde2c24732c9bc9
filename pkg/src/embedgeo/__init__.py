"""Geometry toolkit for contrastive embedding spaces.

Operates on precomputed embedding files: recovers intra-modal similarity
matrices from inter-modal ones, projects image embeddings onto class-text
principal axes, computes alignment-indicator histograms and the modality
gap, and runs retrieval / few-shot classification harnesses.
"""

from .core import (
    EmbeddingSet,
    LabeledEmbeddingSet,
    Modality,
    SimilarityKind,
    SimilarityMatrix,
    cosine_matrix,
    normalize_rows,
)
from .errors import EmbedGeoError
from .indicators import (
    HistogramPair,
    class_pair_histograms,
    histogram_overlap,
    modality_gap,
    modality_pair_histograms,
)
from .projection import PrincipalProjector, fit_class_axes, project, projected_similarity
from .recovery import (
    AnchorSelection,
    GramFactorization,
    recover_image_embeddings,
    recover_intra_anchor,
    recover_intra_anchorfree,
    select_anchors,
)
from .synthetic import ConeSpec, cone_labels, generate_labeled, generate_modality_pair
from .tasks import (
    ClassifierKind,
    LinearClassifier,
    RetrievalResult,
    classify,
    fewshot_accuracy,
    lda_classifier,
    prototype_classifier,
    retrieval_map,
    split_few_shot,
    zero_shot_classifier,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSelection",
    "ClassifierKind",
    "ConeSpec",
    "EmbedGeoError",
    "EmbeddingSet",
    "GramFactorization",
    "HistogramPair",
    "LabeledEmbeddingSet",
    "LinearClassifier",
    "Modality",
    "PrincipalProjector",
    "RetrievalResult",
    "SimilarityKind",
    "SimilarityMatrix",
    "class_pair_histograms",
    "classify",
    "cone_labels",
    "cosine_matrix",
    "fewshot_accuracy",
    "fit_class_axes",
    "generate_labeled",
    "generate_modality_pair",
    "histogram_overlap",
    "lda_classifier",
    "modality_gap",
    "modality_pair_histograms",
    "normalize_rows",
    "project",
    "projected_similarity",
    "prototype_classifier",
    "recover_image_embeddings",
    "recover_intra_anchor",
    "recover_intra_anchorfree",
    "retrieval_map",
    "select_anchors",
    "split_few_shot",
    "zero_shot_classifier",
]
