"""Image-set classification by linear-regression subspace residuals.

A gallery stores one regressor per class, built from raw pixel feature
vectors. A probe set is classified by projecting each image onto every
class subspace and turning the reconstruction residuals into a decision:
majority vote over per-image nearest classes, the single nearest
neighbour, or exponentially weighted soft votes. The fast path caches
pseudoinverses at build time; the online path solves per image.
"""

from .classify import (
    DEFAULT_BETA,
    Decision,
    ProbeSet,
    ResidualMatrix,
    classify_set,
    decide,
    decide_ewv,
    decide_mv,
    decide_nn,
    decision_record,
    estimate_parameters,
    project,
    residual,
    residual_matrix,
)
from .dataset import (
    DatasetManifest,
    EngineConfig,
    EvaluationReport,
    Fold,
    SplitProtocol,
    VectorDataset,
    discover_manifest,
    evaluate,
    fold_data,
    generate_synthetic,
    load_manifest,
    make_splits,
    materialize,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    ConstraintError,
    InvalidInputError,
    ManifestError,
    ProtocolError,
    SetLrcError,
)
from .gallery import (
    Gallery,
    GalleryConfig,
    Regressor,
    build_gallery,
    build_regressor,
    detect_singularity,
    load_gallery,
    perturb,
    precompute_pseudoinverse,
    save_gallery,
    subsample_gallery,
)
from .preprocess import PreprocessConfig, preprocess_image, read_image
from .seeding import derive_seed

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BETA",
    "ConditioningError",
    "ConfigurationError",
    "ConstraintError",
    "DatasetManifest",
    "Decision",
    "EngineConfig",
    "EvaluationReport",
    "Fold",
    "Gallery",
    "GalleryConfig",
    "InvalidInputError",
    "ManifestError",
    "PreprocessConfig",
    "ProbeSet",
    "ProtocolError",
    "Regressor",
    "ResidualMatrix",
    "SetLrcError",
    "SplitProtocol",
    "VectorDataset",
    "build_gallery",
    "build_regressor",
    "classify_set",
    "decide",
    "decide_ewv",
    "decide_mv",
    "decide_nn",
    "decision_record",
    "derive_seed",
    "detect_singularity",
    "discover_manifest",
    "estimate_parameters",
    "evaluate",
    "fold_data",
    "generate_synthetic",
    "load_gallery",
    "load_manifest",
    "make_splits",
    "materialize",
    "perturb",
    "precompute_pseudoinverse",
    "preprocess_image",
    "project",
    "read_image",
    "residual",
    "residual_matrix",
    "save_gallery",
    "subsample_gallery",
]
