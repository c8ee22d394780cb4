"""Confusion counts and the seven scalar metrics of a binary classifier."""

import math
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.stats import rankdata

from sentidrop.errors import LengthMismatchError
from sentidrop.types import Labels, Probabilities

METRIC_NAMES: tuple[str, ...] = (
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc",
    "mcc",
    "kappa",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError(f"Negative confusion count: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def _check_lengths(y: Any, p: Any) -> tuple[np.ndarray, np.ndarray]:
    y = np.atleast_1d(np.asarray(y, dtype=int))
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if y.shape != p.shape:
        raise LengthMismatchError(y.size, p.size)
    return y, p


def confusion(y: Labels, p: Probabilities, threshold: float = 0.5) -> ConfusionMatrix:
    """Counts outcomes; a row is predicted positive iff ``p >= threshold``.

    Raises:
        LengthMismatchError: If ``y`` and ``p`` differ in length.
    """
    y, p = _check_lengths(y, p)
    predicted = p >= threshold
    actual = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fp=int(np.sum(predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


def roc_auc(y: Labels, p: Probabilities) -> float | None:
    """Fraction of concordant positive-negative pairs, ties counting half.

    Returns:
        None if either class is absent.
    """
    y, p = _check_lengths(y, p)
    n_positive = int(np.sum(y == 1))
    n_negative = y.size - n_positive
    if n_positive == 0 or n_negative == 0:
        return None
    ranks = rankdata(p)
    u = ranks[y == 1].sum() - n_positive * (n_positive + 1) / 2.0
    return float(u / (n_positive * n_negative))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    mcc: float
    kappa: float
    confusion: ConfusionMatrix
    model: str = ""
    fold: int | None = None
    #: Metrics whose denominator was zero and were reported as 0.
    degenerate: tuple[str, ...] = field(default=())

    @property
    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "fold": self.fold,
            **self.values,
            "confusion": self.confusion.to_dict(),
            "degenerate": list(self.degenerate),
        }


def _ratio(numerator: float, denominator: float, name: str, degenerate: list[str]) -> float:
    if denominator == 0:
        degenerate.append(name)
        return 0.0
    return numerator / denominator


def metrics(
    cm: ConfusionMatrix,
    y: Labels,
    p: Probabilities,
    model: str = "",
    fold: int | None = None,
) -> MetricsReport:
    """Computes accuracy, precision, recall, F1, AUC, MCC and Cohen's kappa.

    Zero denominators give 0 and are listed in ``degenerate``.

    Raises:
        LengthMismatchError: If ``y`` and ``p`` differ in length.
    """
    y, p = _check_lengths(y, p)
    degenerate: list[str] = []
    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    total = cm.total

    accuracy = _ratio(tp + tn, total, "accuracy", degenerate)
    precision = _ratio(tp, tp + fp, "precision", degenerate)
    recall = _ratio(tp, tp + fn, "recall", degenerate)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", degenerate)

    auc = roc_auc(y, p)
    if auc is None:
        degenerate.append("auc")
        auc = 0.0

    mcc = _ratio(
        tp * tn - fp * fn,
        math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)),
        "mcc",
        degenerate,
    )

    if total:
        expected = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / total**2
    else:
        expected = 1.0
    kappa = _ratio(accuracy - expected, 1.0 - expected, "kappa", degenerate)

    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc,
        mcc=float(np.clip(mcc, -1.0, 1.0)),
        kappa=float(np.clip(kappa, -1.0, 1.0)),
        confusion=cm,
        model=model,
        fold=fold,
        degenerate=tuple(degenerate),
    )


def evaluate(
    y: Labels,
    p: Probabilities,
    threshold: float = 0.5,
    model: str = "",
    fold: int | None = None,
) -> MetricsReport:
    return metrics(confusion(y, p, threshold), y, p, model, fold)


def aggregate_reports(
    reports: Iterable[MetricsReport],
) -> dict[str, dict[str, dict[str, float]]]:
    """Mean and sample standard deviation of each metric, per model.

    Models keep their first-seen order; the deviation of a single report is 0.
    """
    by_model: dict[str, list[MetricsReport]] = defaultdict(list)
    for report in reports:
        by_model[report.model].append(report)

    output: dict[str, dict[str, dict[str, float]]] = {}
    for model, group in by_model.items():
        output[model] = {}
        for name in METRIC_NAMES:
            values = np.array([getattr(r, name) for r in group])
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            output[model][name] = {"mean": float(values.mean()), "std": std}
    return output
