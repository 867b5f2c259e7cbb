"""Binary classification metrics, reported per class.

Accuracy covers the whole evaluation set; precision, recall, and F1 are
computed twice, once treating "fake" (label 0) and once treating "real"
(label 1) as the positive class. F1 is 2PR/(P+R), defined as 0 when both
precision and recall vanish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLASS_NAMES = {0: "fake", 1: "real"}


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    confusion: dict[str, int]  # keys "tp_fake" etc. by predicted/true class
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n_samples": self.n_samples,
            **{
                f"{name}_{field}": getattr(cm, field)
                for name, cm in self.per_class.items()
                for field in ("precision", "recall", "f1")
            },
            "confusion": dict(self.confusion),
        }


def binary_report(y_true, y_pred) -> MetricsReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"label shapes differ: {y_true.shape} vs {y_pred.shape}")
    n = len(y_true)
    accuracy = float((y_true == y_pred).mean()) if n else 0.0

    per_class: dict[str, ClassMetrics] = {}
    confusion: dict[str, int] = {}
    for label, name in CLASS_NAMES.items():
        tp = int(((y_pred == label) & (y_true == label)).sum())
        fp = int(((y_pred == label) & (y_true != label)).sum())
        fn = int(((y_pred != label) & (y_true == label)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[name] = ClassMetrics(
            precision=precision, recall=recall, f1=f1_score(precision, recall)
        )
        confusion[f"tp_{name}"] = tp
        confusion[f"fp_{name}"] = fp
        confusion[f"fn_{name}"] = fn
    return MetricsReport(
        accuracy=accuracy, per_class=per_class, confusion=confusion, n_samples=n
    )
