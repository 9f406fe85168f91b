"""Transferability ranking of pre-trained models from precomputed embeddings."""

from .baselines import SourcePredictions, gbc, hscore, leep, logme, nce
from .correlation import CorrelationReport, pearson, weighted_kendall
from .errors import (
    DataError,
    DegenerateInputError,
    EvaluationError,
    FaceRankError,
    FeatFormatError,
    ManifestError,
    MissingClassError,
    SymmetryError,
)
from .linalg import (
    ClassStats,
    FeatureSet,
    class_statistics,
    log_det_psd,
    pinv_psd,
)
from .metrics import (
    FairnessConfig,
    OverlapMatrix,
    ScoreReport,
    bhattacharyya_pair,
    class_fairness,
    etf_distance,
    fuse_scores,
    minmax_rescale,
    overlap_matrix,
    variance_collapse,
)
from .synth import SynthSpec, default_quality_levels, gen_featureset, gen_zoo
from .zoo import (
    ZooConfig,
    ZooEntry,
    ZooManifest,
    emit_report,
    load_features,
    load_manifest,
    load_predictions,
    write_features,
    write_manifest,
)

__version__ = "0.1.0"
