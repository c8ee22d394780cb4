import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
import structlog
from joblib import delayed, Parallel

from sentidrop.models.base import check_training_data, HyperParams, TrainedModel
from sentidrop.models.tree import grow_classification_tree, GrowthLimits, Tree
from sentidrop.types import FloatMatrix, Labels, ModelFamily, Probabilities
from sentidrop.utils.seeding import derive_rng, TREES

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class ForestParams(HyperParams):
    n_trees: int = 100
    #: None grows until leaves are pure.
    max_depth: int | None = 10
    min_leaf: int = 1
    #: 'sqrt', 'all', an integer count or a fraction of features.
    max_features: str | int | float = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be positive, got {self.n_trees}")

    def features_per_split(self, m: int) -> int:
        match self.max_features:
            case "sqrt":
                k = int(math.sqrt(m))
            case "all" | None:
                k = m
            case float() as fraction:
                k = int(fraction * m)
            case int() as count:
                k = count
            case other:
                raise ValueError(f"Unknown max_features: {other!r}")
        return min(max(1, k), m)


@dataclass(frozen=True, eq=False)
class RandomForestModel(TrainedModel):
    family: ClassVar[ModelFamily] = ModelFamily.RANDOM_FOREST
    params_type: ClassVar[type[HyperParams]] = ForestParams

    trees: tuple[Tree, ...]

    def _predict(self, X: FloatMatrix) -> Probabilities:
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)

    def parameters_to_dict(self) -> dict[str, Any]:
        return {"trees": [tree.to_dict() for tree in self.trees]}

    @classmethod
    def parameters_from_dict(cls, d: dict[str, Any]) -> dict[str, Any]:
        return {"trees": tuple(Tree.from_dict(t) for t in d["trees"])}


def _grow_forest_tree(
    X: FloatMatrix, y: Labels, params: ForestParams, seed: int, index: int
) -> Tree:
    rng = derive_rng(seed, TREES, index)
    n = X.shape[0]
    rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    limits = GrowthLimits(
        max_depth=params.max_depth,
        min_leaf=params.min_leaf,
        max_features=params.features_per_split(X.shape[1]),
    )
    return grow_classification_tree(X, y, rows, limits, rng)


def train_random_forest(
    X: FloatMatrix,
    y: Labels,
    params: ForestParams | None = None,
    seed: int = 0,
    feature_names: tuple[str, ...] = (),
    threads: int = 1,
) -> RandomForestModel:
    """Trains a random forest of Gini CART trees.

    Each tree draws its bootstrap sample and split features from its own
    stream derived from ``seed`` and the tree index, so the forest is the
    same for any number of threads.

    Raises:
        SingleClassTrainingError: If ``y`` has a single class.
    """
    params = params or ForestParams()
    X, y = check_training_data(X, y)
    trees = Parallel(n_jobs=threads)(
        delayed(_grow_forest_tree)(X, y, params, seed, i) for i in range(params.n_trees)
    )
    logger.debug(
        "Trained random forest",
        n_trees=len(trees),
        n_leaves=sum(t.n_leaves for t in trees),
    )
    return RandomForestModel(
        feature_names or tuple(f"x{i}" for i in range(X.shape[1])),
        params,
        seed,
        tuple(trees),
    )
