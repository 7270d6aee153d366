"""Confusion matrix and weighted / micro / macro F1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .core import MovementLabel
from .errors import DomainError

CLASS_ORDER = (MovementLabel.DOWN, MovementLabel.NEUTRAL, MovementLabel.UP)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed [true class, predicted class] in Down, Neutral, Up order."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(pairs: Iterable[tuple]) -> ConfusionMatrix:
    pairs = list(pairs)
    if not pairs:
        return ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))
    true = np.array([int(MovementLabel.parse(t)) for t, _ in pairs], dtype=np.int64)
    pred = np.array([int(MovementLabel.parse(p)) for _, p in pairs], dtype=np.int64)
    return ConfusionMatrix(kernels.confusion_counts(true, pred, 3))


def per_class(cm: ConfusionMatrix) -> dict[str, np.ndarray]:
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    pred_tot = c.sum(axis=0)
    true_tot = c.sum(axis=1)
    precision = np.divide(tp, pred_tot, out=np.zeros(3), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros(3), where=true_tot > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(3), where=denom > 0)
    return {"precision": precision, "recall": recall, "f1": f1, "support": true_tot}


def f1_scores(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Return ``(weighted, micro, macro)``.

    Zero-support classes still count in the macro denominator (with F1 0)
    and carry zero weight in the weighted mean.
    """
    total = cm.total
    if total <= 0:
        raise DomainError("F1 undefined for an empty confusion matrix")
    pc = per_class(cm)
    f1 = pc["f1"]
    weighted = float(np.dot(f1, pc["support"]) / total)
    # single-label: global FP == global FN, so micro P == micro R == accuracy
    tp = float(np.trace(cm.counts))
    micro = tp / total
    macro = float(f1.mean())
    return weighted, micro, macro


def metrics_report(cm: ConfusionMatrix) -> dict:
    weighted, micro, macro = f1_scores(cm)
    pc = per_class(cm)
    return {
        "class_order": [c.display for c in CLASS_ORDER],
        "confusion_matrix": cm.counts.tolist(),
        "per_class": {
            c.display: {
                "precision": float(pc["precision"][k]),
                "recall": float(pc["recall"][k]),
                "f1": float(pc["f1"][k]),
                "support": int(pc["support"][k]),
            }
            for k, c in enumerate(CLASS_ORDER)
        },
        "weighted_f1": weighted,
        "micro_f1": micro,
        "macro_f1": macro,
        "n": cm.total,
    }


def majority_baseline(true_labels: Iterable) -> ConfusionMatrix:
    """Confusion matrix of always predicting the most frequent true class."""
    true = [int(MovementLabel.parse(t)) for t in true_labels]
    if not true:
        return ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))
    top = int(np.argmax(np.bincount(true, minlength=3)))
    return confusion((t, top) for t in true)
