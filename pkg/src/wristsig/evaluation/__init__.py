"""Evaluation protocol, metrics and reports."""

from ..features import FeatureSubset, filter_features
from .metrics import auc_from_arrays, compute_auc, compute_eer, eer_from_arrays, roc_points
from .protocol import (
    Aggregation,
    ExecutionResult,
    ExperimentConfig,
    RepetitionFeatures,
    ScoredSample,
    Task,
    UserSplit,
    fold_training_set,
    leave_one_user_out,
    make_split,
    repetition_features,
    run_executions,
    train_fold,
)
from .report import CellResult, EvaluationReport, build_report, run_experiment

__all__ = [
    "Aggregation",
    "CellResult",
    "EvaluationReport",
    "ExecutionResult",
    "ExperimentConfig",
    "FeatureSubset",
    "RepetitionFeatures",
    "ScoredSample",
    "Task",
    "UserSplit",
    "auc_from_arrays",
    "build_report",
    "compute_auc",
    "compute_eer",
    "eer_from_arrays",
    "filter_features",
    "fold_training_set",
    "leave_one_user_out",
    "make_split",
    "repetition_features",
    "roc_points",
    "run_executions",
    "run_experiment",
    "train_fold",
]
