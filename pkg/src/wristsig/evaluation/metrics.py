"""Threshold-free verification metrics over (score, label) pairs.

Higher scores mean "more genuine". A sample is accepted at threshold ``t``
when its score is >= t; FAR is measured over forgeries, FRR over genuine
samples.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import SingleClassScores
from ..signal import Label


def _is_genuine(label) -> bool:
    if isinstance(label, Label):
        if label is Label.UNKNOWN:
            raise ValueError("scores must carry GENUINE or FORGED labels")
        return label is Label.GENUINE
    if isinstance(label, str):
        return Label(label.lower()) is Label.GENUINE
    return bool(label)


def split_scores(scores: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Separate (score, label) pairs into genuine and forged score arrays."""
    gen, forg = [], []
    for s, lab in scores:
        (gen if _is_genuine(lab) else forg).append(float(s))
    if not gen or not forg:
        raise SingleClassScores(f"need both classes, got {len(gen)} genuine and {len(forg)} forged")
    return np.asarray(gen), np.asarray(forg)


def auc_from_arrays(genuine, forged) -> float:
    """Fraction of (genuine, forged) pairs ranked correctly, ties counting half."""
    g = np.asarray(genuine, dtype=np.float64)
    f = np.sort(np.asarray(forged, dtype=np.float64))
    if g.size == 0 or f.size == 0:
        raise SingleClassScores("need both classes")
    below = np.searchsorted(f, g, side="left")
    not_above = np.searchsorted(f, g, side="right")
    # wins + ties/2, kept in integers until the final division
    twice_u = int(np.sum(below + not_above))
    return twice_u / (2.0 * g.size * f.size)


def compute_auc(scores: Iterable) -> float:
    return auc_from_arrays(*split_scores(scores))


def eer_from_arrays(genuine, forged) -> float:
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    f = np.sort(np.asarray(forged, dtype=np.float64))
    if g.size == 0 or f.size == 0:
        raise SingleClassScores("need both classes")
    thresholds = np.unique(np.concatenate([g, f]))
    far = (f.size - np.searchsorted(f, thresholds, side="left")) / f.size
    frr = np.searchsorted(g, thresholds, side="left") / g.size
    # above every score nothing is accepted
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    diff = far - frr  # non-increasing along the sweep
    exact = np.flatnonzero(diff == 0.0)
    if exact.size:
        i = int(exact[0])
        return float((far[i] + frr[i]) / 2.0)
    i = int(np.flatnonzero(diff > 0.0)[-1])
    j = i + 1
    alpha = diff[i] / (diff[i] - diff[j])
    far_x = far[i] + alpha * (far[j] - far[i])
    frr_x = frr[i] + alpha * (frr[j] - frr[i])
    return float((far_x + frr_x) / 2.0)


def compute_eer(scores: Iterable) -> float:
    """Equal error rate, interpolated between the two thresholds bracketing FAR = FRR."""
    return eer_from_arrays(*split_scores(scores))


def roc_points(genuine, forged) -> tuple[np.ndarray, np.ndarray]:
    """(FAR, TAR) points of the empirical ROC, from (0, 0) up to (1, 1)."""
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    f = np.sort(np.asarray(forged, dtype=np.float64))
    thresholds = np.unique(np.concatenate([g, f]))[::-1]
    far = (f.size - np.searchsorted(f, thresholds, side="left")) / f.size
    tar = (g.size - np.searchsorted(g, thresholds, side="left")) / g.size
    return np.concatenate([[0.0], far]), np.concatenate([[0.0], tar])
