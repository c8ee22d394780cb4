"""Linear models: L2-regularized logistic regression and a linear SVM."""

from dataclasses import dataclass
from typing import Any, ClassVar, Self

import numpy as np
import structlog

from sentidrop.models.base import (
    check_training_data,
    HyperParams,
    log_odds,
    sigmoid,
    TrainedModel,
)
from sentidrop.types import FloatMatrix, Labels, ModelFamily, Probabilities
from sentidrop.utils.seeding import derive_rng, SVM_ORDER

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class LogisticParams(HyperParams):
    l2_lambda: float = 0.01
    learning_rate: float = 0.5
    max_epochs: int = 2000
    tol: float = 1e-9


def logistic_objective(
    theta: np.ndarray, X: FloatMatrix, y: Labels, l2_lambda: float
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy plus ``l2_lambda / 2 * |w|^2`` and its gradient.

    Args:
        theta: Weights followed by the intercept, which is not regularized.
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (w @ w))
    residual = sigmoid(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ residual / X.shape[0] + l2_lambda * w
    grad[-1] = residual.mean()
    return loss, grad


def fit_logistic(
    X: FloatMatrix, y: Labels, params: LogisticParams
) -> tuple[np.ndarray, float, int]:
    """Minimizes the logistic objective by full-batch gradient descent.

    The step is halved whenever it would increase the loss. Training stops
    when the loss improves by less than ``tol`` or after ``max_epochs``.

    Returns:
        A tuple of weights, intercept and the number of epochs run.
    """
    theta = np.zeros(X.shape[1] + 1)
    theta[-1] = log_odds(float(np.clip(y.mean(), 1e-12, 1 - 1e-12)))
    step = params.learning_rate
    loss, grad = logistic_objective(theta, X, y, params.l2_lambda)

    epoch = 0
    for epoch in range(1, params.max_epochs + 1):
        candidate = theta - step * grad
        new_loss, new_grad = logistic_objective(candidate, X, y, params.l2_lambda)
        while new_loss > loss and step > 1e-12:
            step /= 2
            candidate = theta - step * grad
            new_loss, new_grad = logistic_objective(candidate, X, y, params.l2_lambda)
        improvement = loss - new_loss
        if improvement < 0:
            break
        theta, loss, grad = candidate, new_loss, new_grad
        if improvement < params.tol:
            break
    return theta[:-1].copy(), float(theta[-1]), epoch


@dataclass(frozen=True, eq=False)
class LogisticModel(TrainedModel):
    family: ClassVar[ModelFamily] = ModelFamily.LOGISTIC
    params_type: ClassVar[type[HyperParams]] = LogisticParams

    weights: np.ndarray
    intercept: float

    def decision_function(self, X: FloatMatrix) -> np.ndarray:
        return X @ self.weights + self.intercept

    def _predict(self, X: FloatMatrix) -> Probabilities:
        return sigmoid(self.decision_function(X))

    def parameters_to_dict(self) -> dict[str, Any]:
        return {"weights": self.weights.tolist(), "intercept": self.intercept}

    @classmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        return {
            "weights": np.array(d["weights"], dtype=np.float64),
            "intercept": float(d["intercept"]),
        }


def train_logistic(
    X: FloatMatrix,
    y: Labels,
    params: LogisticParams | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] = (),
) -> LogisticModel:
    params = params or LogisticParams()
    X, y = check_training_data(X, y)
    weights, intercept, epochs = fit_logistic(X, y, params)
    logger.debug("Trained logistic regression", epochs=epochs)
    return LogisticModel(
        feature_names or tuple(f"x{i}" for i in range(X.shape[1])),
        params,
        seed,
        weights,
        intercept,
    )


@dataclass(frozen=True)
class SVMParams(HyperParams):
    #: Hinge-loss weight against the ``|w|^2 / 2`` regularizer.
    c: float = 1.0
    epochs: int = 20

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None = None) -> Self:
        d = dict(d or {})
        if "C" in d:
            d["c"] = d.pop("C")
        return super().from_dict(d)


@dataclass(frozen=True, eq=False)
class SVMModel(TrainedModel):
    """Linear SVM with probabilities from a logistic fit on its margins."""

    family: ClassVar[ModelFamily] = ModelFamily.LINEAR_SVM
    params_type: ClassVar[type[HyperParams]] = SVMParams

    weights: np.ndarray
    intercept: float
    calibration_slope: float
    calibration_intercept: float

    def decision_function(self, X: FloatMatrix) -> np.ndarray:
        return X @ self.weights + self.intercept

    def _predict(self, X: FloatMatrix) -> Probabilities:
        return sigmoid(
            self.calibration_slope * self.decision_function(X)
            + self.calibration_intercept
        )

    def parameters_to_dict(self) -> dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "calibration_slope": self.calibration_slope,
            "calibration_intercept": self.calibration_intercept,
        }

    @classmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        return {
            "weights": np.array(d["weights"], dtype=np.float64),
            "intercept": float(d["intercept"]),
            "calibration_slope": float(d["calibration_slope"]),
            "calibration_intercept": float(d["calibration_intercept"]),
        }


def _fit_hinge(
    X: FloatMatrix, signs: np.ndarray, params: SVMParams, seed: int
) -> tuple[np.ndarray, float]:
    n, m = X.shape
    w, b = np.zeros(m), 0.0
    if params.c <= 0:
        return w, b

    # Pegasos-style steps on lambda/2 |w|^2 + mean hinge, lambda = 1 / (C n).
    lam = 1.0 / (params.c * n)
    t = 0
    for epoch in range(params.epochs):
        for i in derive_rng(seed, SVM_ORDER, epoch).permutation(n):
            t += 1
            eta = 1.0 / (lam * t + 1.0)
            violated = signs[i] * (X[i] @ w + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * signs[i] * X[i]
                b += eta * signs[i]
    return w, b


def train_svm(
    X: FloatMatrix,
    y: Labels,
    params: SVMParams | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] = (),
) -> SVMModel:
    """Trains a linear SVM by stochastic subgradient descent on the hinge loss.

    Samples are visited in a seed-derived order each epoch, starting from
    zero weights. Probabilities come from a logistic regression fit on the
    training margins.

    Raises:
        SingleClassTrainingError: If ``y`` has a single class.
    """
    params = params or SVMParams()
    X, y = check_training_data(X, y)
    w, b = _fit_hinge(X, 2.0 * y - 1.0, params, seed)

    margins = (X @ w + b).reshape(-1, 1)
    (slope,), calibration_intercept, _ = fit_logistic(
        margins, y, LogisticParams(l2_lambda=0.0)
    )
    return SVMModel(
        feature_names or tuple(f"x{i}" for i in range(X.shape[1])),
        params,
        seed,
        w,
        float(b),
        float(slope),
        calibration_intercept,
    )
