"""Three-model averaging ensemble and the fusion of tabular and sentiment rows."""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import auto, StrEnum
from pathlib import Path
from typing import Any, Self

import numpy as np
import pandas as pd
import structlog

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import (
    FeatureMismatchError,
    LengthMismatchError,
    OutOfRangeError,
    UnknownStudentError,
)
from sentidrop.models import model_from_dict, model_to_dict, train_model, TrainedModel
from sentidrop.sentiment import (
    DEFAULT_CLASS_THRESHOLD,
    neutral_features,
    SHIFT_FEATURE_NAME,
)
from sentidrop.types import (
    FloatMatrix,
    HyperParameters,
    Labels,
    ModelFamily,
    Probabilities,
    StudentId,
)

logger = structlog.get_logger(__name__)

#: Members of the ensemble, in prediction-column order.
ENSEMBLE_FAMILIES: tuple[ModelFamily, ...] = (
    ModelFamily.GBDT,
    ModelFamily.RANDOM_FOREST,
    ModelFamily.LOGISTIC,
)
PROBABILITY_CLAMP = 1e-12
DEFAULT_DECISION_THRESHOLD = 0.5


class Reduction(StrEnum):
    SUM = auto()
    MEAN = auto()


class FusionMode(StrEnum):
    """How tabular and sentiment rows are combined."""

    #: Concatenate columns, then predict with one ensemble.
    FEATURE = auto()
    #: Average a tabular-only ensemble with a sentiment-only ensemble.
    OUTPUT = auto()


def _check_probabilities(p: Any) -> np.ndarray:
    array = np.asarray(p, dtype=np.float64)
    bad = ~((array >= 0.0) & (array <= 1.0))
    if bad.any():
        raise OutOfRangeError(float(array[bad].flat[0]))
    return array


def average_probs(p_xg: Any, p_rf: Any, p_lr: Any) -> Any:
    """Unweighted mean of the three member probabilities.

    Works on scalars or arrays. The result is kept within the inputs' range.

    Raises:
        OutOfRangeError: If an input is outside [0, 1].
    """
    arrays = np.broadcast_arrays(*map(_check_probabilities, (p_xg, p_rf, p_lr)))
    # Sorted so the sum does not depend on argument order.
    stacked = np.sort(np.stack(arrays), axis=0)
    mean = np.clip(stacked.sum(axis=0) / 3.0, stacked[0], stacked[-1])
    return float(mean) if mean.ndim == 0 else mean


def bce_loss(y: Labels, p: Probabilities, reduction: Reduction = Reduction.MEAN) -> float:
    """Binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].

    Raises:
        LengthMismatchError: If ``y`` and ``p`` differ in length.
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if y.shape != p.shape:
        raise LengthMismatchError(y.size, p.size)
    p = np.clip(p, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    losses = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    if Reduction(reduction) is Reduction.SUM:
        return float(losses.sum())
    return float(losses.mean())


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """Boosted trees, random forest and logistic regression, averaged."""

    members: tuple[TrainedModel, TrainedModel, TrainedModel]

    def __post_init__(self):
        families = tuple(m.family for m in self.members)
        if families != ENSEMBLE_FAMILIES:
            raise ValueError(f"Ensemble members must be {ENSEMBLE_FAMILIES}, got {families}")
        for member in self.members[1:]:
            if member.feature_names != self.feature_names:
                raise FeatureMismatchError(self.feature_names, member.feature_names)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.members[0].feature_names

    def member_probabilities(self, X: FeatureMatrix) -> FloatMatrix:
        """Per-member probabilities, columns ordered as ``ENSEMBLE_FAMILIES``."""
        return np.column_stack([m.predict_proba(X) for m in self.members])

    def predict_proba(self, X: FeatureMatrix) -> Probabilities:
        return average_probs(*self.member_probabilities(X).T)

    def predict_array(self, X: FloatMatrix) -> Probabilities:
        return average_probs(*(m.predict_array(X) for m in self.members))

    def __call__(self, X: FloatMatrix) -> Probabilities:
        return self.predict_array(X)

    def to_dict(self) -> dict[str, Any]:
        return {"members": [model_to_dict(m) for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(tuple(model_from_dict(m) for m in d["members"]))


def train_ensemble(
    X: FeatureMatrix,
    y: Labels,
    hyperparameters: dict[ModelFamily, HyperParameters] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> EnsembleModel:
    hyperparameters = hyperparameters or {}
    members = tuple(
        train_model(family, X, y, hyperparameters.get(family), seed, threads)
        for family in ENSEMBLE_FAMILIES
    )
    return EnsembleModel(members)


def merge_features(dd: FeatureMatrix, sa: FeatureMatrix) -> FeatureMatrix:
    """Joins tabular and sentiment rows on student ID.

    Tabular columns come first. Students without a sentiment row get the
    neutral default row.

    Raises:
        UnknownStudentError: If a sentiment row has no tabular row.
    """
    known = set(dd.row_ids)
    for student_id in sa.row_ids:
        if student_id not in known:
            raise UnknownStudentError(student_id)

    position = {student_id: i for i, student_id in enumerate(sa.row_ids)}
    include_shift = SHIFT_FEATURE_NAME in sa.column_names
    defaults = neutral_features(dd.row_ids, include_shift).select_columns(sa.column_names)
    values = defaults.values.copy()
    for i, student_id in enumerate(dd.row_ids):
        if (j := position.get(student_id)) is not None:
            values[i] = sa.values[j]
    return dd.hstack(defaults.with_values(values))


def merge_predict(
    dd: FeatureMatrix, sa: FeatureMatrix, ensemble: "EnsembleModel | OutputFusionModel"
) -> Probabilities:
    """Predicts from merged tabular and sentiment rows, in ``dd`` row order."""
    return ensemble.predict_proba(merge_features(dd, sa))


@dataclass(frozen=True, eq=False)
class OutputFusionModel:
    """Averages a tabular-only ensemble with a sentiment-only ensemble."""

    tabular: EnsembleModel
    sentiment: EnsembleModel

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.tabular.feature_names + self.sentiment.feature_names

    def member_probabilities(self, X: FeatureMatrix) -> FloatMatrix:
        return (
            self.tabular.member_probabilities(X.select_columns(self.tabular.feature_names))
            + self.sentiment.member_probabilities(
                X.select_columns(self.sentiment.feature_names)
            )
        ) / 2.0

    def predict_proba(self, X: FeatureMatrix) -> Probabilities:
        if X.column_names != self.feature_names:
            raise FeatureMismatchError(self.feature_names, X.column_names)
        return (
            self.tabular.predict_proba(X.select_columns(self.tabular.feature_names))
            + self.sentiment.predict_proba(X.select_columns(self.sentiment.feature_names))
        ) / 2.0

    def predict_array(self, X: FloatMatrix) -> Probabilities:
        k = len(self.tabular.feature_names)
        return (self.tabular.predict_array(X[:, :k]) + self.sentiment.predict_array(X[:, k:])) / 2.0

    def __call__(self, X: FloatMatrix) -> Probabilities:
        return self.predict_array(X)

    def to_dict(self) -> dict[str, Any]:
        return {"tabular": self.tabular.to_dict(), "sentiment": self.sentiment.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(EnsembleModel.from_dict(d["tabular"]), EnsembleModel.from_dict(d["sentiment"]))


def train_output_fusion(
    X: FeatureMatrix,
    y: Labels,
    sentiment_columns: Sequence[str],
    hyperparameters: dict[ModelFamily, HyperParameters] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> OutputFusionModel:
    tabular_columns = [c for c in X.column_names if c not in set(sentiment_columns)]
    return OutputFusionModel(
        train_ensemble(X.select_columns(tabular_columns), y, hyperparameters, seed, threads),
        train_ensemble(X.select_columns(sentiment_columns), y, hyperparameters, seed, threads),
    )


@dataclass(frozen=True)
class Predictions:
    student_ids: tuple[StudentId, ...]
    #: Per-member probabilities, columns ordered as ``ENSEMBLE_FAMILIES``.
    members: FloatMatrix
    ensemble: Probabilities

    @classmethod
    def from_model(cls, model: "EnsembleModel | OutputFusionModel", X: FeatureMatrix) -> Self:
        return cls(X.row_ids, model.member_probabilities(X), model.predict_proba(X))

    def labels(self, threshold: float = DEFAULT_DECISION_THRESHOLD) -> Labels:
        return (self.ensemble >= threshold).astype(int)

    def to_frame(self, threshold: float = DEFAULT_DECISION_THRESHOLD) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "student_id": list(self.student_ids),
                "p_xg": self.members[:, 0],
                "p_rf": self.members[:, 1],
                "p_lr": self.members[:, 2],
                "p_ensemble": self.ensemble,
                "predicted_label": self.labels(threshold),
                "threshold": threshold,
            }
        )


def write_predictions(
    path: Path, predictions: Predictions, threshold: float = DEFAULT_DECISION_THRESHOLD
) -> None:
    predictions.to_frame(threshold).to_csv(path, index=False, lineterminator="\n")


@dataclass(frozen=True)
class AtRiskStudent:
    student_id: StudentId
    probability: float
    #: First-month sentiment classified as negative.
    early_negative: bool
    #: Engagement in the lowest tercile.
    low_engagement: bool


def flag_at_risk(
    predictions: Predictions,
    features: FeatureMatrix | None = None,
    threshold: float = DEFAULT_DECISION_THRESHOLD,
    engagement_column: str | None = None,
    sentiment_threshold: float = DEFAULT_CLASS_THRESHOLD,
) -> list[AtRiskStudent]:
    """Lists students at or above the threshold, most at risk first.

    Args:
        predictions: Ensemble predictions.
        features: Merged (unscaled) feature rows of the same students, used
          for the intervention markers.
        threshold: Decision threshold.
        engagement_column: Feature whose lowest tercile marks low engagement.
        sentiment_threshold: Class threshold for first-month negativity.
    """
    n = len(predictions.student_ids)
    early = np.zeros(n, dtype=bool)
    low = np.zeros(n, dtype=bool)
    if features is not None:
        if features.row_ids != predictions.student_ids:
            raise ValueError("Feature rows do not match predictions")
        names = features.column_names
        if {"first_month_count", "sentiment_first_month"} <= set(names):
            early = (features.column("first_month_count") > 0) & (
                features.column("sentiment_first_month") <= -sentiment_threshold
            )
        if engagement_column in names and n:
            engagement = features.column(engagement_column)
            low = engagement <= np.quantile(engagement, 1 / 3)

    flagged = [
        AtRiskStudent(student_id, float(p), bool(e), bool(l))
        for student_id, p, e, l in zip(predictions.student_ids, predictions.ensemble, early, low)
        if p >= threshold
    ]
    return sorted(flagged, key=lambda s: (-s.probability, s.student_id))
