"""Pair-level evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .pairs import Direction


@dataclass(frozen=True)
class RocResult:
    auc: float
    n_pos: int
    n_neg: int
    tie_count: int


def roc_auc(scores, labels) -> RocResult:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie).

    Labels are 1 for X->Y pairs; scores are signed X->Y scores. Uses midranks
    so ties across classes earn half credit.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if np.any(np.isnan(s)):
        raise ValueError("scores contain NaN")
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"AUC needs both classes (got {n_pos} positive, {n_neg} negative)")
    ranks = rankdata(s)  # midranks; infinities rank as extreme values
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    # count positive/negative pairs that tie exactly
    _, inv = np.unique(s, return_inverse=True)
    ties = int(np.sum(np.bincount(inv[pos], minlength=inv.max() + 1) *
                      np.bincount(inv[~pos], minlength=inv.max() + 1)))
    return RocResult(float(u / (n_pos * n_neg)), n_pos, n_neg, ties)


def pair_credit(decision: Direction, label: int) -> float:
    if decision is Direction.undecided:
        return 0.5
    return 1.0 if decision.label == label else 0.0


def accuracy(reports, labels, weights=None) -> float:
    """Mean per-pair credit (1 correct, 0.5 undecided, 0 wrong), optionally weighted."""
    if len(reports) == 0:
        raise ValueError("accuracy of an empty report list")
    if len(reports) != len(labels):
        raise ValueError("one label per report required")
    credit = np.array([pair_credit(r.decision, int(lab)) for r, lab in zip(reports, labels)])
    if weights is None:
        return float(credit.mean())
    w = np.asarray(weights, dtype=np.float64)
    return float(np.sum(w * credit) / np.sum(w))
