"""Global genuine-vs-forged classifiers."""

from .base import (
    DEFAULT_THRESHOLD,
    ModelKind,
    Score,
    TrainingSet,
    VerificationModel,
    build_training_set,
    predict_score,
)
from .forest import ForestConfig, train_random_forest
from .logistic import LogisticConfig, train_logistic
from .naive_bayes import train_gaussian_nb
from .serialize import dumps_model, load_model, loads_model, save_model


def train(kind, ts: TrainingSet, seed: int = 0, n_trees: int = 100) -> VerificationModel:
    """Dispatch to the trainer for ``kind`` with default settings."""
    kind = ModelKind(kind)
    if kind is ModelKind.LOGISTIC:
        return train_logistic(ts)
    if kind is ModelKind.GAUSSIAN_NB:
        return train_gaussian_nb(ts)
    return train_random_forest(ts, ForestConfig(n_trees=n_trees, seed=seed))


__all__ = [
    "DEFAULT_THRESHOLD",
    "ForestConfig",
    "LogisticConfig",
    "ModelKind",
    "Score",
    "TrainingSet",
    "VerificationModel",
    "build_training_set",
    "dumps_model",
    "load_model",
    "loads_model",
    "predict_score",
    "save_model",
    "train",
    "train_gaussian_nb",
    "train_logistic",
    "train_random_forest",
]
