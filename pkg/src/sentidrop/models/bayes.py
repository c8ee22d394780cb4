from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from sentidrop.models.base import check_training_data, HyperParams, sigmoid, TrainedModel
from sentidrop.types import FloatMatrix, Labels, ModelFamily, Probabilities


@dataclass(frozen=True)
class NaiveBayesParams(HyperParams):
    #: Variance floor as a fraction of the largest feature variance.
    var_smoothing: float = 1e-9


@dataclass(frozen=True, eq=False)
class NaiveBayesModel(TrainedModel):
    """Gaussian naive Bayes; rows of ``means``/``variances`` are classes 0, 1."""

    family: ClassVar[ModelFamily] = ModelFamily.NAIVE_BAYES
    params_type: ClassVar[type[HyperParams]] = NaiveBayesParams

    means: np.ndarray
    variances: np.ndarray
    priors: np.ndarray

    def _joint_log_likelihood(self, X: FloatMatrix) -> np.ndarray:
        log_prob = np.empty((X.shape[0], 2))
        for k in range(2):
            log_prob[:, k] = np.log(self.priors[k]) - 0.5 * np.sum(
                np.log(2.0 * np.pi * self.variances[k])
                + (X - self.means[k]) ** 2 / self.variances[k],
                axis=1,
            )
        return log_prob

    def _predict(self, X: FloatMatrix) -> Probabilities:
        log_prob = self._joint_log_likelihood(X)
        return sigmoid(log_prob[:, 1] - log_prob[:, 0])

    def parameters_to_dict(self) -> dict[str, Any]:
        return {
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "priors": self.priors.tolist(),
        }

    @classmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        return {key: np.array(d[key], dtype=np.float64) for key in ("means", "variances", "priors")}


def train_naive_bayes(
    X: FloatMatrix,
    y: Labels,
    params: NaiveBayesParams | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] = (),
) -> NaiveBayesModel:
    """Fits per-class Gaussians per feature with class-frequency priors.

    Variances are floored at ``var_smoothing`` times the largest feature
    variance (or at ``var_smoothing`` itself if every feature is constant).
    """
    params = params or NaiveBayesParams()
    X, y = check_training_data(X, y)
    largest = float(X.var(axis=0).max()) if X.shape[1] else 0.0
    epsilon = params.var_smoothing * largest if largest > 0 else params.var_smoothing

    means = np.vstack([X[y == k].mean(axis=0) for k in (0, 1)])
    variances = np.vstack([X[y == k].var(axis=0) for k in (0, 1)]) + epsilon
    priors = np.array([(y == k).mean() for k in (0, 1)])
    return NaiveBayesModel(
        feature_names or tuple(f"x{i}" for i in range(X.shape[1])),
        params,
        seed,
        means,
        variances,
        priors,
    )
