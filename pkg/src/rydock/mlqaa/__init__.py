"""Learned pulse-parameter regression replacing the per-register search."""

from .dataset import (
    FAMILIES,
    SPACINGS,
    CorpusEntry,
    DatasetRecord,
    corpus_entry,
    generate_corpus,
    label_dataset,
    load_dataset,
    save_dataset,
    shape_positions,
    train_holdout_split,
)
from .gcn import (
    TARGETS,
    GcnModel,
    GraphFeatures,
    featurize,
    forward,
    gradient_check,
    load_models,
    mape,
    propagation_matrix,
    predict_params,
    save_models,
    train,
)

__all__ = [
    "FAMILIES", "SPACINGS", "CorpusEntry", "DatasetRecord", "corpus_entry",
    "generate_corpus", "label_dataset", "load_dataset", "save_dataset",
    "shape_positions", "train_holdout_split",
    "TARGETS", "GcnModel", "GraphFeatures", "featurize", "forward",
    "gradient_check", "load_models", "mape", "propagation_matrix",
    "predict_params", "save_models", "train",
]
