"""Ranking metrics for anomaly scores (higher score = more anomalous)."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores for {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y


def descending_order(scores) -> np.ndarray:
    """Indices by descending score; equal scores keep ascending index order."""
    s = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(s.size), -s))


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: concordant pairs plus half the tied pairs, over all pairs."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both classes present")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Average precision at each positive's rank."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("auc_pr needs at least one positive")
    hits = y[descending_order(s)]
    ranks = np.flatnonzero(hits) + 1
    precision = np.arange(1, n_pos + 1) / ranks
    return float(precision.mean())


def precision_at_n(scores, labels) -> float:
    """Fraction of positives among the top-``n`` rows, ``n`` = number of positives."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("precision_at_n needs at least one positive")
    top = descending_order(s)[:n_pos]
    return float(y[top].sum() / n_pos)
