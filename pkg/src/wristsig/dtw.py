"""Unconstrained dynamic time warping with absolute-difference local cost.

Steps are (i-1, j), (i, j-1), (i-1, j-1) with unit weight, both endpoints
anchored, no window and no length normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptySequence, NonFiniteInput


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path_length: Optional[int] = None
    path: Optional[tuple[tuple[int, int], ...]] = None


def _check(seq, name: str) -> list[float]:
    values = [float(v) for v in seq]
    if not values:
        raise EmptySequence(f"sequence {name} is empty")
    if not all(math.isfinite(v) for v in values):
        raise NonFiniteInput(f"sequence {name} contains NaN or infinite values")
    return values


def dtw_distance(a, b, *, return_path: bool = False) -> DtwResult:
    """Minimal cumulative |a_i - b_j| cost over all monotone warping paths.

    With ``return_path`` the full cost matrix is kept and the optimal path is
    backtracked (diagonal preferred on ties); otherwise two rows suffice.
    """
    x = _check(a, "a")
    y = _check(b, "b")
    if return_path:
        return _dtw_full(x, y)

    inf = math.inf
    m = len(y)
    prev = [inf] * m
    # row 0
    acc = 0.0
    x0 = x[0]
    for j in range(m):
        acc = abs(x0 - y[j]) + acc
        prev[j] = acc
    for i in range(1, len(x)):
        xi = x[i]
        cur = [0.0] * m
        left = abs(xi - y[0]) + prev[0]
        cur[0] = left
        for j in range(1, m):
            up = prev[j]
            diag = prev[j - 1]
            best = diag if diag <= up else up
            if left < best:
                best = left
            left = abs(xi - y[j]) + best
            cur[j] = left
        prev = cur
    return DtwResult(prev[-1])


def _dtw_full(x: list[float], y: list[float]) -> DtwResult:
    n, m = len(x), len(y)
    inf = math.inf
    cost = [[inf] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = min(
                    cost[i - 1][j - 1] if i and j else inf,
                    cost[i - 1][j] if i else inf,
                    cost[i][j - 1] if j else inf,
                )
            cost[i][j] = abs(x[i] - y[j]) + best

    i, j = n - 1, m - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        candidates = []
        if i and j:
            candidates.append((cost[i - 1][j - 1], 0, i - 1, j - 1))
        if i:
            candidates.append((cost[i - 1][j], 1, i - 1, j))
        if j:
            candidates.append((cost[i][j - 1], 2, i, j - 1))
        _, _, i, j = min(candidates)
        path.append((i, j))
    path.reverse()
    return DtwResult(cost[-1][-1], len(path), tuple(path))


def dtw_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """DTW distances for many pairs at once.

    ``a`` has shape (n, L) and ``b`` shape (n, M); returns the n distances
    ``dtw(a[p], b[p])``. Produces exactly the values of :func:`dtw_distance`
    since the recurrence evaluates the same sums in the same order.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"incompatible batch shapes {a.shape} and {b.shape}")
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise EmptySequence("batch contains empty sequences")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NonFiniteInput()

    if a.shape[0] > _CHUNK:
        return np.concatenate(
            [_dtw_block(a[s : s + _CHUNK], b[s : s + _CHUNK]) for s in range(0, a.shape[0], _CHUNK)]
        )
    return _dtw_block(a, b)


# pairs per vectorized block; keeps the (L, M, n) cost cube cache-sized
_CHUNK = 4096


def _dtw_block(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    la = a.shape[1]
    lb = b.shape[1]
    # local costs laid out (L, M, n) so each row update is contiguous
    local = np.abs(a.T[:, None, :] - b.T[None, :, :])
    prev = np.cumsum(local[0], axis=0)
    for i in range(1, la):
        row = local[i]
        cur = np.empty_like(prev)
        left = row[0] + prev[0]
        cur[0] = left
        for j in range(1, lb):
            best = np.minimum(np.minimum(prev[j - 1], prev[j]), left)
            left = row[j] + best
            cur[j] = left
        prev = cur
    return prev[-1].copy()
