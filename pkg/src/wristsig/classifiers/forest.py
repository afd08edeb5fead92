"""Bagged CART ensemble (random forest).

Trees are grown to purity with Gini splits over a random feature subset of
size ceil(sqrt(width)) per node. Each tree casts one vote and the score is the
fraction of GENUINE votes, so scores lie on the grid k / n_trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..rng import keyed_rng
from .base import ModelKind, TrainingSet, VerificationModel


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    seed: int = 0
    max_features: Optional[int] = None


def _best_split(v: np.ndarray, y: np.ndarray, n_pos: int):
    """Best Gini threshold on one feature, or None when the feature is constant."""
    order = np.argsort(v, kind="stable")
    vs = v[order]
    gaps = vs[1:] > vs[:-1]
    if not gaps.any():
        return None
    m = v.size
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    pos_left = np.cumsum(y[order])[:-1].astype(np.float64)
    pos_right = n_pos - pos_left
    # maximizing this sum minimizes the size-weighted child Gini impurity
    purity = (pos_left**2 + (n_left - pos_left) ** 2) / n_left + (
        pos_right**2 + (n_right - pos_right) ** 2
    ) / n_right
    purity = np.where(gaps, purity, -np.inf)
    i = int(np.argmax(purity))
    lo, hi = vs[i], vs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not (lo <= thr < hi):
        thr = lo
    return float(purity[i]), float(thr)


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, mtry: int):
    n, width = X.shape
    boot = rng.integers(0, n, size=n)
    feature, threshold, left, right, vote = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        vote.append(0)
        return len(feature) - 1

    stack = [(new_node(), boot)]
    while stack:
        node, idx = stack.pop()
        yy = y[idx]
        n_pos = int(yy.sum())
        if 0 < n_pos < idx.size:
            order = rng.permutation(width)
            best = None
            for rank, f in enumerate(order):
                if rank >= mtry and best is not None:
                    break
                found = _best_split(X[idx, f], yy, n_pos)
                if found is not None and (best is None or found[0] > best[0]):
                    best = (found[0], found[1], int(f))
            if best is not None:
                _, thr, f = best
                go_left = X[idx, f] <= thr
                feature[node] = f
                threshold[node] = thr
                l_node, r_node = new_node(), new_node()
                left[node], right[node] = l_node, r_node
                stack.append((r_node, idx[~go_left]))
                stack.append((l_node, idx[go_left]))
                continue
        n_neg = idx.size - n_pos
        if n_pos != n_neg:
            vote[node] = int(n_pos > n_neg)
        else:
            # tie: side with the first sample drawn into this leaf (label-symmetric)
            vote[node] = int(y[idx[0]])
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(vote, dtype=np.int64),
    )


def train_random_forest(ts: TrainingSet, config: ForestConfig = ForestConfig()) -> VerificationModel:
    ts.require_both_classes()
    if config.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    width = ts.X.shape[1]
    mtry = config.max_features or math.ceil(math.sqrt(width))
    trees = [
        _grow_tree(ts.X, ts.y, keyed_rng(config.seed, "tree", t), mtry) for t in range(config.n_trees)
    ]
    sizes = np.array([t[0].size for t in trees], dtype=np.int64)
    params = {
        "tree_offsets": np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
        "feature": np.concatenate([t[0] for t in trees]),
        "threshold": np.concatenate([t[1] for t in trees]),
        "left": np.concatenate([t[2] for t in trees]),
        "right": np.concatenate([t[3] for t in trees]),
        "vote": np.concatenate([t[4] for t in trees]),
    }
    return VerificationModel(
        ModelKind.RANDOM_FOREST,
        params,
        ts.feature_mask,
        {**ts.counts, "seed": config.seed, "n_trees": config.n_trees, "max_features": mtry},
    )


def tree_votes(params: dict, X: np.ndarray) -> np.ndarray:
    """(n_trees, n) matrix of 0/1 GENUINE votes."""
    offsets = params["tree_offsets"]
    n_trees = offsets.size - 1
    feature, threshold = params["feature"], params["threshold"]
    left, right, vote = params["left"], params["right"], params["vote"]
    n = X.shape[0]
    rows = np.arange(n)
    votes = np.empty((n_trees, n), dtype=np.int64)
    for t in range(n_trees):
        base = offsets[t]
        node = np.zeros(n, dtype=np.int64)
        while True:
            f = feature[base + node]
            inner = f >= 0
            if not inner.any():
                break
            fi = np.where(inner, f, 0)
            go_left = X[rows, fi] <= threshold[base + node]
            nxt = np.where(go_left, left[base + node], right[base + node])
            node = np.where(inner, nxt, node)
        votes[t] = vote[base + node]
    return votes


def predict(params: dict, X: np.ndarray) -> np.ndarray:
    votes = tree_votes(params, X)
    return votes.sum(axis=0) / votes.shape[0]
