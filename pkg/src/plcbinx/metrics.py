"""Precision, recall and F1 per label with support-weighted averages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class LengthMismatch(ValueError):
    pass


@dataclass
class LabelRow:
    label: str
    support: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    labels: list[str]
    per_label: list[LabelRow]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: np.ndarray = field(repr=False)  # rows = truth, cols = prediction
    per_platform: list[dict] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / max(1, self.total))


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def metrics(predictions: list[str], truths: list[str], labels: list[str] | None = None) -> EvalReport:
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truths)} truths")
    if labels is None:
        labels = sorted(set(truths) | set(predictions))
    labels = list(labels)
    pos = {l: i for i, l in enumerate(labels)}
    extra = (set(truths) | set(predictions)) - set(pos)
    if extra:
        raise ValueError(f"labels outside the label set: {sorted(extra)}")
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, t in zip(predictions, truths):
        cm[pos[t], pos[p]] += 1
    return report_from_confusion(labels, cm)


def report_from_confusion(labels: list[str], cm: np.ndarray) -> EvalReport:
    rows = []
    for i, label in enumerate(labels):
        tp = cm[i, i]
        p = _div(tp, cm[:, i].sum())
        r = _div(tp, cm[i, :].sum())
        rows.append(LabelRow(label, int(cm[i, :].sum()), p, r, _div(2 * p * r, p + r)))
    total = sum(r.support for r in rows)

    def weighted(attr):
        return _div(sum(r.support * getattr(r, attr) for r in rows), total)
    return EvalReport(list(labels), rows, weighted("precision"), weighted("recall"), weighted("f1"), cm)


def weighted_f1(predictions, truths) -> float:
    return metrics(list(predictions), list(truths)).weighted_f1
