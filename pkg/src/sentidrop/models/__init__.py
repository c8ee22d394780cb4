"""From-scratch binary classifiers with a shared probability contract."""

from pathlib import Path
from typing import Any

from sentidrop.artifacts import read_json, write_json
from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import UnknownFormatVersionError
from sentidrop.models.base import (
    as_training_arrays,
    HyperParams,
    TrainedModel,
)
from sentidrop.models.bayes import NaiveBayesModel, NaiveBayesParams, train_naive_bayes
from sentidrop.models.boosting import BoostingParams, GBDTModel, train_gbdt
from sentidrop.models.forest import ForestParams, RandomForestModel, train_random_forest
from sentidrop.models.linear import (
    LogisticModel,
    LogisticParams,
    SVMModel,
    SVMParams,
    train_logistic,
    train_svm,
)
from sentidrop.models.tree import grow_classification_tree, Tree, TreeNode
from sentidrop.types import FloatMatrix, Labels, ModelFamily

__all__ = (
    "BoostingParams",
    "ForestParams",
    "GBDTModel",
    "LogisticModel",
    "LogisticParams",
    "NaiveBayesModel",
    "NaiveBayesParams",
    "RandomForestModel",
    "SVMModel",
    "SVMParams",
    "TrainedModel",
    "Tree",
    "TreeNode",
    "grow_classification_tree",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "params_for",
    "save_model",
    "train_gbdt",
    "train_logistic",
    "train_model",
    "train_naive_bayes",
    "train_random_forest",
    "train_svm",
)

MODEL_FORMAT_VERSION = 1

MODEL_TYPES: dict[ModelFamily, type[TrainedModel]] = {
    cls.family: cls
    for cls in (LogisticModel, RandomForestModel, GBDTModel, NaiveBayesModel, SVMModel)
}


def params_for(family: ModelFamily, hyperparameters: dict[str, Any] | None = None) -> HyperParams:
    """Builds a family's hyper-parameters, defaults filled in."""
    return MODEL_TYPES[ModelFamily(family)].params_type.from_dict(hyperparameters)


def train_model(
    family: ModelFamily,
    X: FeatureMatrix | FloatMatrix,
    y: Labels,
    hyperparameters: dict[str, Any] | HyperParams | None = None,
    seed: int = 0,
    threads: int = 1,
) -> TrainedModel:
    """Trains a model of any family.

    Args:
        family: A model family.
        X: A fully imputed feature matrix (or a raw array).
        y: Binary labels.
        hyperparameters: Family hyper-parameters; missing ones use defaults.
        seed: Root seed of all stochastic choices.
        threads: Worker count, used by the random forest.
    """
    family = ModelFamily(family)
    values, names = as_training_arrays(X)
    if not isinstance(hyperparameters, HyperParams):
        hyperparameters = params_for(family, hyperparameters)
    match family:
        case ModelFamily.LOGISTIC:
            return train_logistic(values, y, hyperparameters, seed, names)
        case ModelFamily.RANDOM_FOREST:
            return train_random_forest(values, y, hyperparameters, seed, names, threads)
        case ModelFamily.GBDT:
            return train_gbdt(values, y, hyperparameters, seed, names)
        case ModelFamily.NAIVE_BAYES:
            return train_naive_bayes(values, y, hyperparameters, seed, names)
        case ModelFamily.LINEAR_SVM:
            return train_svm(values, y, hyperparameters, seed, names)


def model_to_dict(model: TrainedModel) -> dict[str, Any]:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "family": str(model.family),
        "feature_names": list(model.feature_names),
        "hyperparameters": model.hyperparameters.to_dict(),
        "seed": model.seed,
        "parameters": model.parameters_to_dict(),
    }


def model_from_dict(d: dict[str, Any]) -> TrainedModel:
    """Restores a model serialized by :func:`model_to_dict`.

    Raises:
        UnknownFormatVersionError: If the format version is not supported.
    """
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise UnknownFormatVersionError(
            f"Unsupported model format version: {d.get('format_version')!r}"
        )
    cls = MODEL_TYPES[ModelFamily(d["family"])]
    return cls(
        feature_names=tuple(d["feature_names"]),
        hyperparameters=cls.params_type.from_dict(d["hyperparameters"]),
        seed=int(d["seed"]),
        **cls.parameters_from_dict(d["parameters"]),
    )


def save_model(model: TrainedModel, path: Path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path: Path) -> TrainedModel:
    return model_from_dict(read_json(path))
