"""Forced-invalidation toolkit.

Constrained n-gram permutation of text, augmentation of labelled
datasets with permuted samples labelled "invalid", construction of
word-order-perturbed evaluation sets, and model-agnostic scoring of
word-order sensitivity, plus a small trainable attention classifier that
runs the full loop at desk scale.
"""

from .augment import (
    AugmentConfig,
    AugmentManifest,
    AugmentResult,
    NothingPermutable,
    UnsupportedTask,
    augment,
    make_label_space,
)
from .dataset_io import (
    DatasetStats,
    ParseError,
    filter_min_words,
    read_dataset,
    write_dataset,
)
from .evalsets import EvalBuild, EvalVariant, build_eval_sets
from .model import (
    AttentionClassifier,
    Divergence,
    ModelBundle,
    ModelConfig,
    ShapeError,
    TrainReport,
    VocabMismatch,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)
from .permute import (
    Chunking,
    EmptyInput,
    NGramPermuter,
    NotPermutable,
    PerturbationSpec,
    ResampleBudgetExceeded,
    TokenSequence,
    is_permutable,
    permute,
    segment,
    tokenize,
)
from .records import (
    AugmentedRecord,
    Label,
    Record,
    SchemaError,
    UnknownComponent,
)
from .rng import SplitMix64, derive_seed
from .scoring import (
    DuplicatePrediction,
    EmptyReport,
    KeyMismatch,
    MetricsRow,
    MissingPrediction,
    PredictionRecord,
    UnknownHeuristic,
    aggregate,
    normalize_answer,
    read_predictions,
    render_report,
    score,
    score_drop_em,
    score_hans,
    write_predictions,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionClassifier", "AugmentConfig", "AugmentManifest",
    "AugmentResult", "AugmentedRecord", "Chunking", "DatasetStats",
    "Divergence", "DuplicatePrediction", "EmptyInput", "EmptyReport",
    "EvalBuild", "EvalVariant", "KeyMismatch", "Label", "MetricsRow",
    "MissingPrediction", "ModelBundle", "ModelConfig", "NGramPermuter",
    "NotPermutable", "NothingPermutable", "ParseError", "PerturbationSpec",
    "PredictionRecord", "Record", "ResampleBudgetExceeded", "SchemaError",
    "ShapeError", "SplitMix64", "TokenSequence", "TrainReport",
    "UnknownComponent", "UnknownHeuristic", "UnsupportedTask",
    "VocabMismatch", "aggregate", "augment", "build_eval_sets",
    "derive_seed", "filter_min_words", "grad_check", "is_permutable",
    "load_checkpoint", "make_label_space", "normalize_answer", "permute",
    "read_dataset", "read_predictions", "render_report", "save_checkpoint",
    "score", "score_drop_em", "score_hans", "segment", "tokenize",
    "write_dataset", "write_predictions",
]
