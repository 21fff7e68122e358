"""Confusion-matrix metrics and ROC for the traffic classifiers.

Rates follow the usual conventions: tpr + fnr = 100 and tnr + fpr = 100 as
percentages whenever both classes appear in the test set; rates whose class
is absent are reported as ``None``, never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import Dataset


@dataclass
class EvalMetrics:
    accuracy: float
    tpr: Optional[float]
    tnr: Optional[float]
    fnr: Optional[float]
    fpr: Optional[float]
    roc: list[tuple[float, float]] = field(default_factory=list)  # (fpr, tpr) fractions
    auc: Optional[float] = None
    confusion: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "fnr": self.fnr,
            "fpr": self.fpr,
            "auc": self.auc,
            "roc": [[f, t] for f, t in self.roc],
            "confusion": self.confusion,
        }

    def roc_csv(self) -> str:
        lines = ["fpr,tpr"]
        lines += [f"{f:.6f},{t:.6f}" for f, t in self.roc]
        return "\n".join(lines) + "\n"


def rate_identities_hold(
    tpr: Optional[float],
    fnr: Optional[float],
    tnr: Optional[float],
    fpr: Optional[float],
    tolerance: float = 1e-6,
) -> tuple[bool, dict[str, float]]:
    """Check tpr+fnr = 100 and tnr+fpr = 100 (percent scale).

    Returns the verdict plus each pair's deviation from 100, so callers can
    report which convention failed by how much.
    """
    deviations: dict[str, float] = {}
    if tpr is not None and fnr is not None:
        deviations["tpr+fnr"] = abs((tpr + fnr) - 100.0)
    if tnr is not None and fpr is not None:
        deviations["tnr+fpr"] = abs((tnr + fpr) - 100.0)
    ok = all(d <= tolerance for d in deviations.values())
    return ok, deviations


def roc_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float]]:
    """Threshold sweep over descending attack scores, from (0,0) to (1,1)."""
    positives = int((labels == 1).sum())
    negatives = int((labels == 0).sum())
    if positives == 0 or negatives == 0:
        return []
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    previous = None
    for idx in order:
        score = scores[idx]
        if previous is not None and score != previous:
            points.append((fp / negatives, tp / positives))
        if labels[idx] == 1:
            tp += 1
        else:
            fp += 1
        previous = score
    points.append((1.0, 1.0))
    return points


def auc_from_points(points: list[tuple[float, float]]) -> Optional[float]:
    if not points:
        return None
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def evaluate(predict_fn: Callable, test_set: Dataset) -> EvalMetrics:
    """Score a classifier over a test set.

    ``predict_fn`` takes one feature row and returns either a bare label or a
    (label, posterior) pair; posteriors enable the ROC sweep.
    """
    if test_set.n_rows == 0:
        raise ValueError("test set is empty")
    labels = test_set.labels
    tp = tn = fp = fn = 0
    scores: list[Optional[float]] = []
    for row, truth in zip(test_set.features, labels):
        out = predict_fn(row)
        if isinstance(out, tuple):
            label, posterior = out
            posterior = np.asarray(posterior).reshape(-1)
            scores.append(float(posterior[-1]) if posterior.size >= 2 else float(posterior[0]))
        else:
            label = out
            scores.append(None)
        label = int(label)
        if truth == 1:
            tp += label == 1
            fn += label == 0
        else:
            tn += label == 0
            fp += label == 1

    positives = tp + fn
    negatives = tn + fp
    total = positives + negatives
    accuracy = 100.0 * (tp + tn) / total
    tpr = 100.0 * tp / positives if positives else None
    fnr = 100.0 * fn / positives if positives else None
    tnr = 100.0 * tn / negatives if negatives else None
    fpr = 100.0 * fp / negatives if negatives else None

    roc: list[tuple[float, float]] = []
    auc: Optional[float] = None
    if all(s is not None for s in scores) and positives and negatives:
        roc = roc_points(np.array(scores, dtype=float), labels)
        auc = auc_from_points(roc)

    return EvalMetrics(
        accuracy=accuracy, tpr=tpr, tnr=tnr, fnr=fnr, fpr=fpr,
        roc=roc, auc=auc,
        confusion={"tp": tp, "tn": tn, "fp": fp, "fn": fn},
    )
