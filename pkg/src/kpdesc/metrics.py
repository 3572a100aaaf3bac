"""Ranking metrics for pair verification and retrieval."""

from __future__ import annotations

import numpy as np


def fpr_at_recall(scores, labels, recall: float = 0.95) -> float:
    """Smallest false-positive rate over score thresholds reaching the recall.

    Predictions are positive when score >= threshold; thresholds run over
    the distinct score values, tie-broken toward the lower threshold (the
    higher recall) which never increases the reported rate.

    Parameters
    ----------
    scores : array of pair similarities (higher = more likely matching)
    labels : boolean array, True for matching pairs
    recall : target true-positive rate in (0, 1]
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos < 1 or n_neg < 1:
        raise ValueError("need at least one positive and one negative pair")
    if not 0.0 < recall <= 1.0:
        raise ValueError(f"recall must lie in (0, 1], got {recall}")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    # Evaluate only at the last index of each run of equal scores: a
    # threshold cannot split ties.
    last_of_run = np.ones(s.size, dtype=bool)
    last_of_run[:-1] = s_sorted[:-1] != s_sorted[1:]
    tpr = tp[last_of_run] / n_pos
    fpr = fp[last_of_run] / n_neg
    feasible = tpr >= recall
    return float(fpr[feasible].min())


def average_precision(scores, relevant) -> float:
    """Mean of precision at each relevant rank, over all relevant items.

    Items are ranked by descending score (stable for ties).  Relevant items
    that rank low simply contribute low precision; the denominator is the
    total number of relevant items.
    """
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(relevant, dtype=bool)
    n_rel = int(r.sum())
    if n_rel < 1:
        raise ValueError("need at least one relevant item")
    order = np.argsort(-s, kind="stable")
    r_sorted = r[order]
    ranks = np.flatnonzero(r_sorted) + 1
    hits = np.arange(1, n_rel + 1)
    return float(np.sum(hits / ranks) / n_rel)
