from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
import structlog

from sentidrop.models.base import (
    check_training_data,
    HyperParams,
    log_odds,
    sigmoid,
    TrainedModel,
)
from sentidrop.models.tree import grow_newton_tree, NewtonLimits, Tree
from sentidrop.types import FloatMatrix, Labels, ModelFamily, Probabilities
from sentidrop.utils.seeding import derive_rng, TREES

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class BoostingParams(HyperParams):
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    lambda_l2: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    #: Fraction of rows drawn without replacement per round.
    subsample: float = 1.0
    #: Fraction of features drawn per round.
    colsample: float = 1.0


@dataclass(frozen=True, eq=False)
class GBDTModel(TrainedModel):
    """Additive trees on the log-odds scale over a prior base score."""

    family: ClassVar[ModelFamily] = ModelFamily.GBDT
    params_type: ClassVar[type[HyperParams]] = BoostingParams

    base_score: float
    trees: tuple[Tree, ...]

    def decision_function(self, X: FloatMatrix) -> np.ndarray:
        margin = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            margin += tree.predict(X)
        return margin

    def staged_decision_function(self, X: FloatMatrix) -> Iterator[np.ndarray]:
        """Yields margins after the base score and after every round."""
        margin = np.full(X.shape[0], self.base_score)
        yield margin.copy()
        for tree in self.trees:
            margin += tree.predict(X)
            yield margin.copy()

    def _predict(self, X: FloatMatrix) -> Probabilities:
        return sigmoid(self.decision_function(X))

    def parameters_to_dict(self) -> dict[str, Any]:
        return {
            "base_score": self.base_score,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        return {
            "base_score": float(d["base_score"]),
            "trees": tuple(Tree.from_dict(t) for t in d["trees"]),
        }


def train_gbdt(
    X: FloatMatrix,
    y: Labels,
    params: BoostingParams | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] = (),
) -> GBDTModel:
    """Trains gradient-boosted trees by Newton boosting on the logistic loss.

    Every round fits a tree to gradients ``p - y`` and hessians ``p(1 - p)``
    with exact greedy splits.

    Raises:
        SingleClassTrainingError: If ``y`` has a single class.
    """
    params = params or BoostingParams()
    X, y = check_training_data(X, y)
    n, m = X.shape

    base_score = log_odds(float(y.mean()))
    margin = np.full(n, base_score)
    trees = []
    for r in range(params.n_rounds):
        p = sigmoid(margin)
        gradients, hessians = p - y, p * (1.0 - p)

        rows, features = None, None
        if params.subsample < 1.0 or params.colsample < 1.0:
            rng = derive_rng(seed, TREES, r)
            if params.subsample < 1.0:
                size = max(1, int(params.subsample * n))
                rows = np.sort(rng.choice(n, size=size, replace=False))
            if params.colsample < 1.0:
                size = max(1, int(params.colsample * m))
                features = tuple(int(j) for j in np.sort(rng.choice(m, size, replace=False)))

        limits = NewtonLimits(
            max_depth=params.max_depth,
            lambda_l2=params.lambda_l2,
            gamma=params.gamma,
            min_child_weight=params.min_child_weight,
            features=features,
        )
        tree = grow_newton_tree(X, gradients, hessians, limits, params.learning_rate, rows)
        margin += tree.predict(X)
        trees.append(tree)

    logger.debug("Trained boosted trees", n_rounds=len(trees), base_score=base_score)
    return GBDTModel(
        feature_names or tuple(f"x{i}" for i in range(m)),
        params,
        seed,
        base_score,
        tuple(trees),
    )
