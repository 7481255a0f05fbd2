"""Confusion-matrix metrics, ROC curves and trapezoidal AUC.

Positive class is 1 (cancerous) throughout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


def _ratio(num: int, den: int):
    return num / den if den else None


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    roc_points: list = field(default_factory=list)
    roc_thresholds: list = field(default_factory=list)
    auc: float | None = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return _ratio(self.tp + self.tn, self.total)

    @property
    def sensitivity(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self):
        return _ratio(self.tn, self.tn + self.fp)

    def to_dict(self):
        return {
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "total": self.total,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "auc": self.auc,
            "roc_points": [[float(a), float(b)] for a, b in self.roc_points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write_roc_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, (fpr, tpr) in zip(self.roc_thresholds, self.roc_points):
                writer.writerow([format(t, ".17g"), format(fpr, ".17g"), format(tpr, ".17g")])


def _labels(seq, what):
    arr = np.asarray(seq, dtype=np.int64).ravel()
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{what} must contain only 0 and 1")
    return arr


def confusion(predictions, truth) -> EvalReport:
    p = _labels(predictions, "predictions")
    t = _labels(truth, "truth")
    if len(p) != len(t):
        raise ValueError(f"length mismatch: {len(p)} predictions vs {len(t)} truth labels")
    if len(t) == 0:
        raise ValueError("empty label lists")
    return EvalReport(
        tp=int(np.sum((p == 1) & (t == 1))),
        fp=int(np.sum((p == 1) & (t == 0))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def roc(scores, truth):
    """ROC points (FPR, TPR) swept over distinct thresholds, high to low.

    Tied scores enter the curve together as one step. Returns
    ``(points, thresholds, auc)``; the first point (0, 0) carries an
    infinite threshold.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = _labels(truth, "truth")
    if len(s) != len(t):
        raise ValueError("scores and truth differ in length")
    pos = int(t.sum())
    neg = len(t) - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both classes in the truth labels")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    points = [(0.0, 0.0)]
    thresholds = [float("inf")]
    tp = fp = 0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        group = t[i:j]
        tp += int(group.sum())
        fp += int(len(group) - group.sum())
        points.append((fp / neg, tp / pos))
        thresholds.append(float(s[i]))
        i = j
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return points, thresholds, area


def evaluate(scores, truth) -> EvalReport:
    """Confusion counts at score > 0 plus the full ROC sweep."""
    s = np.asarray(scores, dtype=np.float64)
    report = confusion((s > 0).astype(np.int64), truth)
    t = np.asarray(truth)
    if t.min() != t.max():
        report.roc_points, report.roc_thresholds, report.auc = roc(s, t)
    return report
