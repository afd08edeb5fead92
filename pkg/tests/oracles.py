"""Slow, independent reference implementations used only by the tests."""

from __future__ import annotations

import math
import sys
from functools import lru_cache

sys.setrecursionlimit(10_000)


def naive_normalize(x):
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    sd = math.sqrt(var)
    if sd < 1e-12:
        return [0.0] * n
    return [(v - mean) / sd for v in x]


def naive_dct(x, k=None):
    """Orthonormal DCT-II by direct O(N^2) summation, zero-padded to k."""
    n = len(x)
    k = n if k is None else k
    out = []
    for j in range(k):
        if j >= n:
            out.append(0.0)
            continue
        w = math.sqrt(1.0 / n) if j == 0 else math.sqrt(2.0 / n)
        out.append(w * sum(x[i] * math.cos(math.pi * j * (2 * i + 1) / (2 * n)) for i in range(n)))
    return out


@lru_cache(maxsize=None)
def recursive_dtw(a: tuple, b: tuple) -> float:
    """DTW written as the textbook recursion on prefixes.

    The cache is keyed on the prefix tuples, so evaluating every pair from an
    exhaustive enumeration reuses sub-results across pairs.
    """
    cost = abs(a[-1] - b[-1])
    if len(a) == 1 and len(b) == 1:
        return cost
    options = []
    if len(a) > 1 and len(b) > 1:
        options.append(recursive_dtw(a[:-1], b[:-1]))
    if len(a) > 1:
        options.append(recursive_dtw(a[:-1], b))
    if len(b) > 1:
        options.append(recursive_dtw(a, b[:-1]))
    return cost + min(options)


def warping_paths(n: int, m: int):
    """Every monotone path from (0, 0) to (n-1, m-1) with unit steps."""

    def walk(i, j, acc):
        if (i, j) == (n - 1, m - 1):
            yield acc
            return
        if i + 1 < n and j + 1 < m:
            yield from walk(i + 1, j + 1, acc + [(i + 1, j + 1)])
        if i + 1 < n:
            yield from walk(i + 1, j, acc + [(i + 1, j)])
        if j + 1 < m:
            yield from walk(i, j + 1, acc + [(i, j + 1)])

    yield from walk(0, 0, [(0, 0)])


def enumerated_dtw(a, b) -> float:
    return min(sum(abs(a[i] - b[j]) for i, j in p) for p in warping_paths(len(a), len(b)))


def pair_count_auc(genuine, forged) -> float:
    total = 0.0
    for g in genuine:
        for f in forged:
            if g > f:
                total += 1.0
            elif g == f:
                total += 0.5
    return total / (len(genuine) * len(forged))


def sweep_eer(genuine, forged) -> float:
    """EER by explicit loops over every candidate threshold plus +inf."""
    cands = sorted(set(genuine) | set(forged)) + [math.inf]
    pts = []
    for t in cands:
        far = sum(1 for f in forged if f >= t) / len(forged)
        frr = sum(1 for g in genuine if g < t) / len(genuine)
        pts.append((far, frr))
    for far, frr in pts:
        if far == frr:
            return far
    for (far0, frr0), (far1, frr1) in zip(pts, pts[1:]):
        d0, d1 = far0 - frr0, far1 - frr1
        if d0 > 0 > d1:
            a = d0 / (d0 - d1)
            return ((far0 + a * (far1 - far0)) + (frr0 + a * (frr1 - frr0))) / 2
    raise AssertionError("no crossing found")


def trapezoid_auc(far, tar) -> float:
    return sum((far[i + 1] - far[i]) * (tar[i + 1] + tar[i]) / 2 for i in range(len(far) - 1))


def brute_bayes(x, genuine_rows, forged_rows, floor=1e-9) -> float:
    """Posterior P(genuine | x) from explicit Gaussian densities and priors."""

    def stats(rows):
        n = len(rows)
        means = [sum(r[d] for r in rows) / n for d in range(len(x))]
        vars_ = [max(sum((r[d] - means[d]) ** 2 for r in rows) / n, floor) for d in range(len(x))]
        return means, vars_

    def density(means, vars_):
        p = 1.0
        for d in range(len(x)):
            p *= math.exp(-((x[d] - means[d]) ** 2) / (2 * vars_[d])) / math.sqrt(2 * math.pi * vars_[d])
        return p

    n = len(genuine_rows) + len(forged_rows)
    pg = density(*stats(genuine_rows)) * len(genuine_rows) / n
    pf = density(*stats(forged_rows)) * len(forged_rows) / n
    return pg / (pg + pf)
