"""Accuracy and ROC AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import EmptyInput, LengthMismatch, SingleClassInput


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    auc: float
    n: int

    def to_dict(self):
        return {"accuracy": self.accuracy, "auc": self.auc, "n": self.n}


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"inputs of shapes {a.shape} and {b.shape}")
    if a.size == 0:
        raise EmptyInput("empty input")
    return a, b


def accuracy(y_true, y_pred):
    """Fraction of positions where prediction equals truth."""
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.count_nonzero(y_true == y_pred)) / y_true.size


def roc_auc(y_true, scores):
    """Mann-Whitney AUC from midranks; tied scores count one half.

    Equivalent to averaging ``[s_pos > s_neg] + 0.5 * [s_pos == s_neg]``
    over every positive/negative pair, in O(n log n).
    """
    y_true, scores = _pair(y_true, scores)
    pos = y_true == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = y_true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("roc_auc needs both classes")
    ranks = rankdata(np.asarray(scores, dtype=float), method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(y_true, scores, threshold=0.5):
    scores = np.asarray(scores, dtype=float)
    pred = (scores >= threshold).astype(np.int8)
    return EvalResult(accuracy(y_true, pred), roc_auc(y_true, scores), int(len(scores)))
