from enum import auto, StrEnum
from typing import Any, Protocol, TypeAlias

import numpy as np
import numpy.typing as npt

StudentId: TypeAlias = str

#: Binary labels, 1 for dropout and 0 for active.
Labels: TypeAlias = npt.NDArray[np.int_]
#: Per-row probabilities of the positive (dropout) class.
Probabilities: TypeAlias = npt.NDArray[np.float64]
FloatMatrix: TypeAlias = npt.NDArray[np.float64]
BoolMatrix: TypeAlias = npt.NDArray[np.bool_]

#: A calendar month as 'YYYY-MM'.
MonthKey: TypeAlias = str

HyperParameters: TypeAlias = dict[str, Any]


class SentimentClass(StrEnum):
    """Represents a sentiment polarity class."""

    NEGATIVE = auto()
    NEUTRAL = auto()
    POSITIVE = auto()


#: Fixed class order used for scorer outputs.
SENTIMENT_CLASSES: tuple[SentimentClass, ...] = (
    SentimentClass.NEGATIVE,
    SentimentClass.NEUTRAL,
    SentimentClass.POSITIVE,
)


class ModelFamily(StrEnum):
    """Represents a classifier family."""

    LOGISTIC = auto()
    RANDOM_FOREST = auto()
    GBDT = auto()
    NAIVE_BAYES = auto()
    LINEAR_SVM = auto()


class Predictor(Protocol):
    """Anything mapping a raw feature array to positive-class probabilities."""

    def __call__(self, X: FloatMatrix) -> Probabilities: ...


class ArrayModel(Protocol):
    feature_names: tuple[str, ...]

    def predict_array(self, X: FloatMatrix) -> Probabilities: ...
