"""Ridge-penalized binary logistic regression fitted by damped Newton steps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import NonConvergenceWarning
from .base import ModelKind, TrainingSet, VerificationModel


@dataclass(frozen=True)
class LogisticConfig:
    ridge: float = 1e-8
    tol: float = 1e-8
    max_iter: int = 10_000


def standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return mean, scale


def loss_and_grad(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, ridge: float):
    """Penalized negative log-likelihood and its gradient.

    ``theta`` is ``[w_1..w_p, bias]``; the bias is not penalized.
    """
    w, b = theta[:-1], theta[-1]
    z = Z @ w + b
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z) + ridge * (w @ w))
    r = expit(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = Z.T @ r + 2.0 * ridge * w
    grad[-1] = r.sum()
    return loss, grad


def _hessian(theta, Z, ridge):
    z = Z @ theta[:-1] + theta[-1]
    p = expit(z)
    s = p * (1.0 - p)
    A = np.hstack([Z, np.ones((Z.shape[0], 1))])
    H = A.T @ (A * s[:, None])
    H[np.arange(Z.shape[1]), np.arange(Z.shape[1])] += 2.0 * ridge
    return H


def fit(Z: np.ndarray, y: np.ndarray, config: LogisticConfig = LogisticConfig()):
    """Minimize the penalized loss from zero; returns (theta, loss_history, converged)."""
    theta = np.zeros(Z.shape[1] + 1)
    loss, grad = loss_and_grad(theta, Z, y, config.ridge)
    history = [loss]
    converged = False
    for _ in range(config.max_iter):
        if np.linalg.norm(grad) < config.tol:
            converged = True
            break
        H = _hessian(theta, Z, config.ridge)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            step = grad
        t = 1.0
        for _ in range(60):
            cand = theta - t * step
            cand_loss, cand_grad = loss_and_grad(cand, Z, y, config.ridge)
            if cand_loss <= loss:
                break
            t *= 0.5
        else:
            # no decrease representable in floating point: we are at the optimum
            converged = True
            break
        if cand_loss == loss and np.array_equal(cand, theta):
            converged = True
            break
        theta, loss, grad = cand, cand_loss, cand_grad
        history.append(loss)
    else:
        converged = np.linalg.norm(grad) < config.tol
    return theta, history, converged


def train_logistic(ts: TrainingSet, config: LogisticConfig = LogisticConfig()) -> VerificationModel:
    ts.require_both_classes()
    mean, scale = standardizer(ts.X)
    Z = (ts.X - mean) / scale
    theta, history, converged = fit(Z, ts.y.astype(np.float64), config)
    if not converged:
        warnings.warn(
            f"logistic regression stopped after {len(history) - 1} iterations without reaching "
            f"gradient norm {config.tol}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return VerificationModel(
        ModelKind.LOGISTIC,
        {"weights": theta[:-1].copy(), "bias": theta[-1:].copy(), "mean": mean, "scale": scale},
        ts.feature_mask,
        {
            **ts.counts,
            "ridge": config.ridge,
            "iterations": len(history) - 1,
            "converged": bool(converged),
            "final_loss": history[-1],
        },
    )


def predict(params: dict, X: np.ndarray) -> np.ndarray:
    Z = (X - params["mean"]) / params["scale"]
    return expit(Z @ params["weights"] + params["bias"][0])
