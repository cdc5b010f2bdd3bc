"""Small metric helpers the experiment drivers report."""

from __future__ import annotations

from math import comb

import numpy as np

__all__ = ["r2_score", "accuracy", "adjusted_rand_index", "w1_distance"]


def r2_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    ss_res = float(((y_true - y_pred) ** 2).sum())
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return float((y_true == y_pred).mean())


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.shape[0]
    pairs = {}
    for x, y in zip(a.tolist(), b.tolist()):
        pairs[(x, y)] = pairs.get((x, y), 0) + 1
    count_a = {}
    count_b = {}
    for (x, y), c in pairs.items():
        count_a[x] = count_a.get(x, 0) + c
        count_b[y] = count_b.get(y, 0) + c
    sum_ij = sum(comb(c, 2) for c in pairs.values())
    sum_a = sum(comb(c, 2) for c in count_a.values())
    sum_b = sum(comb(c, 2) for c in count_b.values())
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


def w1_distance(sample_a, sample_b) -> float:
    """Empirical 1-Wasserstein distance between equal-size 1-D samples."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.shape != b.shape:
        raise ValueError("samples must have equal size")
    return float(np.abs(a - b).mean())
