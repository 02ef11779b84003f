"""Classification metrics: accuracy, per-class P/R/F1, macro-F1, confusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class Metrics:
    classes: tuple[str, ...]
    accuracy: float
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    macro_f1: float
    confusion: np.ndarray  # row-normalised; rows without support are zero
    counts: np.ndarray  # raw confusion counts
    n: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "classes": list(self.classes),
            "per_class": {
                c: {
                    "precision": self.precision[c],
                    "recall": self.recall[c],
                    "f1": self.f1[c],
                    "support": self.support[c],
                }
                for c in self.classes
            },
            "confusion_normalized": self.confusion.tolist(),
            "confusion_counts": self.counts.astype(int).tolist(),
        }


def classification_metrics(
    y_true: Sequence[str], y_pred: Sequence[str], classes: Sequence[str]
) -> Metrics:
    """Score predictions against truth over ``classes``.

    Macro-F1 averages over the classes that occur in either ``y_true`` or
    ``y_pred``; precision or recall of an empty denominator counts as 0.
    """
    classes = tuple(classes)
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} truths vs {len(y_pred)} predictions")
    if not y_true:
        raise ValueError("cannot score an empty set")
    index = {c: i for i, c in enumerate(classes)}
    for label in (*y_true, *y_pred):
        if label not in index:
            raise ValueError(f"label {label!r} is not among the classes {classes}")
    k = len(classes)
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[t], index[p]] += 1

    tp = np.diag(counts).astype(float)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    precision = np.divide(tp, predicted, out=np.zeros(k), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(k), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(k), where=denom > 0)
    present = (support > 0) | (predicted > 0)
    rows = support[:, None].astype(float)
    confusion = np.divide(counts, rows, out=np.zeros((k, k)), where=rows > 0)

    return Metrics(
        classes=classes,
        accuracy=float(tp.sum() / len(y_true)),
        precision={c: float(precision[i]) for i, c in enumerate(classes)},
        recall={c: float(recall[i]) for i, c in enumerate(classes)},
        f1={c: float(f1[i]) for i, c in enumerate(classes)},
        support={c: int(support[i]) for i, c in enumerate(classes)},
        macro_f1=float(f1[present].mean()),
        confusion=confusion,
        counts=counts,
        n=len(y_true),
    )
