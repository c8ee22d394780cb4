from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, fields
from typing import Any, ClassVar, Self

import numpy as np
from scipy.special import expit

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import ConfigError, FeatureMismatchError, SingleClassTrainingError
from sentidrop.types import FloatMatrix, Labels, ModelFamily, Probabilities


@dataclass(frozen=True)
class HyperParams:
    """Base of per-family hyper-parameter sets."""

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None = None) -> Self:
        """Creates params from a mapping; missing keys keep their defaults.

        Raises:
            ConfigError: If a key is not a field of this family.
        """
        d = d or {}
        names = {f.name for f in fields(cls)}
        if unknown := sorted(set(d) - names):
            raise ConfigError(
                "model.hyperparameters",
                f"unknown keys {', '.join(unknown)} "
                f"(expected any of {', '.join(sorted(names))})",
            )
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TrainedModel(ABC):
    """A trained binary classifier predicting the dropout probability."""

    family: ClassVar[ModelFamily]
    params_type: ClassVar[type[HyperParams]]

    feature_names: tuple[str, ...]
    hyperparameters: HyperParams
    seed: int

    def predict_proba(self, X: FeatureMatrix) -> Probabilities:
        """Predicts per-row probabilities of the positive (dropout) class.

        Raises:
            FeatureMismatchError: If columns differ from the training columns,
              order included.
        """
        if X.column_names != self.feature_names:
            raise FeatureMismatchError(self.feature_names, X.column_names)
        return self.predict_array(X.require_imputed())

    def __call__(self, X: FloatMatrix) -> Probabilities:
        return self.predict_array(X)

    def predict_array(self, X: FloatMatrix) -> Probabilities:
        """Predicts from a raw array with columns in training order."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.feature_names):
            raise FeatureMismatchError(
                self.feature_names, [f"column_{i}" for i in range(X.shape[1])]
            )
        return np.clip(self._predict(X), 0.0, 1.0)

    @abstractmethod
    def _predict(self, X: FloatMatrix) -> Probabilities:
        raise NotImplementedError

    @abstractmethod
    def parameters_to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    @classmethod
    @abstractmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        """Converts serialized parameters to constructor keyword arguments."""
        raise NotImplementedError


def check_training_data(X: FloatMatrix, y: Labels) -> tuple[FloatMatrix, Labels]:
    """Validates a training matrix and binary labels.

    Raises:
        SingleClassTrainingError: If ``y`` lacks one of the classes.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"Shapes do not match: X {X.shape}, y {y.shape}")
    if np.isnan(X).any():
        raise ValueError("Training matrix has missing cells")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("Labels must be 0 or 1")
    if y.size < 2 or y.min() == y.max():
        raise SingleClassTrainingError()
    return X, y


def as_training_arrays(
    X: FeatureMatrix | FloatMatrix, feature_names: tuple[str, ...] | None = None
) -> tuple[FloatMatrix, tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.require_imputed(), X.column_names
    X = np.asarray(X, dtype=np.float64)
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    return X, tuple(feature_names)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return expit(z)


def log_odds(p: float) -> float:
    return float(np.log(p) - np.log1p(-p))
