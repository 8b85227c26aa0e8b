"""Feature extraction, linear SVM training, ensembles and the model registry."""

from .ensemble import (
    EnsembleModel,
    LabeledExample,
    Prediction,
    SvmTextModel,
    available_flavors,
    register_flavor,
    train_flavor,
)
from .features import EmbeddingTable, SparseVector, Vocabulary, embed_average, vectorize_bow
from .registry import ActiveModel, ModelRecord, ModelRegistry
from .svm import LinearModel, calibrate, svm_objective, svm_objective_gradient, train_linear_svm

__all__ = [
    "ActiveModel",
    "EmbeddingTable",
    "EnsembleModel",
    "LabeledExample",
    "LinearModel",
    "ModelRecord",
    "ModelRegistry",
    "Prediction",
    "SparseVector",
    "SvmTextModel",
    "Vocabulary",
    "available_flavors",
    "calibrate",
    "embed_average",
    "register_flavor",
    "svm_objective",
    "svm_objective_gradient",
    "train_flavor",
    "train_linear_svm",
    "vectorize_bow",
]
