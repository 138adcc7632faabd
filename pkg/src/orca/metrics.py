"""Threshold-free and thresholded classification metrics."""
from __future__ import annotations

import numpy as np

from .errors import UndefinedMetricError

F1_CLIP = (0.05, 0.95)


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.shape[0]:
        raise UndefinedMetricError("metric needs both classes present")
    return s, y


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.shape[0]]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(x.shape[0])
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def auc_roc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg); tied pairs count one half."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    u = average_ranks(s)[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _sweep(s, y):
    """Cumulative TP/FP at each distinct score, highest score first."""
    order = np.argsort(-s, kind="stable")
    ss, yy = s[order], y[order]
    last = np.r_[ss[1:] != ss[:-1], True]
    tp = np.cumsum(yy)[last]
    fp = np.cumsum(~yy)[last]
    return ss[last], tp, fp


def average_precision(scores, labels) -> float:
    """Sum over descending thresholds of (recall step) x precision."""
    s, y = _check(scores, labels)
    _, tp, fp = _sweep(s, y)
    recall = tp / y.sum()
    precision = tp / (tp + fp)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def best_f1(scores, labels, clip=F1_CLIP) -> tuple[float, float, float, float]:
    """(threshold, precision, recall, f1) at the F1-maximising cut ``score >= threshold``.

    Candidate cuts are the distinct scores; ties go to the lowest threshold.
    The reported threshold is clipped into ``clip``; precision/recall/F1 are
    those of the selected cut.
    """
    s, y = _check(scores, labels)
    thr, tp, fp = _sweep(s, y)
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    with np.errstate(invalid="ignore"):
        f1 = np.where(tp > 0, 2 * precision * recall / (precision + recall), 0.0)
    best = f1.max()
    k = int(np.flatnonzero(f1 == best)[-1])  # thresholds descend, so last = lowest
    return (float(np.clip(thr[k], *clip)), float(precision[k]), float(recall[k]), float(f1[k]))


def bcd_auc(auc_rally: float, auc_crash: float) -> float:
    """Geometric mean of the rally and crash AUCs."""
    return float(np.sqrt(auc_rally * auc_crash))
