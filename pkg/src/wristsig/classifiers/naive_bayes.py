"""Gaussian naive Bayes with frequency priors and a variance floor."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import ModelKind, TrainingSet, VerificationModel

VARIANCE_FLOOR = 1e-9


def train_gaussian_nb(ts: TrainingSet, var_floor: float = VARIANCE_FLOOR) -> VerificationModel:
    ts.require_both_classes()
    params = {}
    for name, cls in (("genuine", 1), ("forged", 0)):
        rows = ts.X[ts.y == cls]
        params[f"{name}_mean"] = rows.mean(axis=0)
        params[f"{name}_var"] = np.maximum(rows.var(axis=0), var_floor)
        params[f"{name}_prior"] = np.array([rows.shape[0] / ts.X.shape[0]])
    return VerificationModel(
        ModelKind.GAUSSIAN_NB, params, ts.feature_mask, {**ts.counts, "var_floor": var_floor}
    )


def _log_joint(params, name, X):
    mean, var = params[f"{name}_mean"], params[f"{name}_var"]
    ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + (X - mean) ** 2 / var, axis=1)
    return ll + np.log(params[f"{name}_prior"][0])


def predict(params: dict, X: np.ndarray) -> np.ndarray:
    return expit(_log_joint(params, "genuine", X) - _log_joint(params, "forged", X))
