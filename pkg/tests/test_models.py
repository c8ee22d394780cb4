from pathlib import Path

import numpy as np
import pytest

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import (
    ConfigError,
    FeatureMismatchError,
    SingleClassTrainingError,
    UnknownFormatVersionError,
)
from sentidrop.models import (
    grow_classification_tree,
    load_model,
    model_from_dict,
    model_to_dict,
    params_for,
    save_model,
    SVMParams,
    train_gbdt,
    train_model,
)
from sentidrop.models.boosting import BoostingParams
from sentidrop.models.linear import logistic_objective
from sentidrop.synth import xor_dataset
from sentidrop.types import ModelFamily

from tests.helpers import assert_probabilities, FAST_HYPERPARAMETERS


@pytest.fixture(scope="module")
def linear_problem() -> tuple[FeatureMatrix, np.ndarray]:
    rng = np.random.default_rng(0)
    values = rng.normal(size=(200, 3))
    labels = (values[:, 0] - values[:, 1] > 0).astype(int)
    return FeatureMatrix.from_array(values, ("a", "b", "noise")), labels


def binary_cross_entropy(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def test_logistic_gradient_matches_finite_differences(linear_problem):
    fm, y = linear_problem
    X = fm.require_imputed()
    theta = np.array([0.3, -0.2, 0.1, 0.05])
    _, grad = logistic_objective(theta, X, y, l2_lambda=0.1)

    eps = 1e-6
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = eps
        plus, _ = logistic_objective(theta + step, X, y, 0.1)
        minus, _ = logistic_objective(theta - step, X, y, 0.1)
        numeric[i] = (plus - minus) / (2 * eps)
    assert np.allclose(grad, numeric, atol=1e-6)


@pytest.mark.parametrize("family", list(ModelFamily))
def test_every_family_learns_linear_signal(family: ModelFamily, linear_problem):
    fm, y = linear_problem
    model = train_model(family, fm, y, FAST_HYPERPARAMETERS.get(family), seed=3)
    p = model.predict_proba(fm)
    assert_probabilities(p)
    assert ((p >= 0.5) == y).mean() > 0.75


def small_random_problem(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=40) > 0).astype(int)
    y[:2] = (0, 1)
    return X, y


@pytest.mark.parametrize("seed", range(50))
def test_boosting_training_loss_never_increases(seed: int):
    X, y = small_random_problem(seed)
    model = train_gbdt(X, y, BoostingParams(n_rounds=15, max_depth=2))
    losses = [binary_cross_entropy(y, m) for m in model.staged_decision_function(X)]
    assert len(losses) == 16
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_zero_rounds_predict_the_prior(linear_problem):
    fm, y = linear_problem
    X = fm.require_imputed()
    model = train_gbdt(X, y, BoostingParams(n_rounds=0))
    assert model.trees == ()
    assert np.allclose(model.predict_array(X), y.mean(), rtol=0, atol=1e-12)


def test_huge_gamma_keeps_the_base_score(linear_problem):
    fm, y = linear_problem
    X = fm.require_imputed()
    model = train_gbdt(X, y, BoostingParams(n_rounds=10, gamma=1e9))
    assert all(tree.n_leaves == 1 for tree in model.trees)
    assert np.allclose(model.predict_array(X), y.mean(), rtol=0, atol=1e-9)


@pytest.mark.parametrize(
    "family,hyperparameters",
    [
        (ModelFamily.GBDT, {"n_rounds": 10, "max_depth": 3}),
        (ModelFamily.GBDT, {"n_rounds": 10, "max_depth": 2, "lambda_l2": 0.5}),
        (ModelFamily.RANDOM_FOREST, {"n_trees": 8, "max_features": "all"}),
        (
            ModelFamily.RANDOM_FOREST,
            {"n_trees": 8, "bootstrap": False, "max_features": "all"},
        ),
    ],
)
def test_constant_feature_leaves_tree_predictions_unchanged(
    family, hyperparameters, linear_problem
):
    fm, y = linear_problem
    X = fm.require_imputed()
    padded = np.column_stack([np.full(X.shape[0], 7.0), X])
    model = train_model(family, X, y, hyperparameters, seed=4)
    padded_model = train_model(family, padded, y, hyperparameters, seed=4)
    assert np.array_equal(model.predict_array(X), padded_model.predict_array(padded))


def test_svm_label_flip_negates_weights(linear_problem):
    fm, y = linear_problem
    X = fm.require_imputed()
    model = train_model(ModelFamily.LINEAR_SVM, X, y, {"epochs": 5}, seed=6)
    flipped = train_model(ModelFamily.LINEAR_SVM, X, 1 - y, {"epochs": 5}, seed=6)
    assert np.any(model.weights != 0)
    assert np.array_equal(flipped.weights, -model.weights)
    assert flipped.intercept == -model.intercept


@pytest.mark.parametrize("seed", range(5))
def test_naive_bayes_boundary_of_symmetric_classes(seed: int):
    rng = np.random.default_rng(seed)
    negatives = rng.normal(-1.0, 1.0, size=2000)
    positives = rng.normal(1.0, 1.0, size=2000)
    X = np.concatenate([negatives, positives]).reshape(-1, 1)
    y = np.repeat([0, 1], 2000)
    model = train_model(ModelFamily.NAIVE_BAYES, X, y)

    grid = np.linspace(-1.0, 1.0, 2001)
    p = model.predict_array(grid.reshape(-1, 1))
    assert np.all(np.diff(p) > 0)
    boundary = grid[np.argmin(np.abs(p - 0.5))]
    assert abs(boundary) < 0.1


def test_unlimited_tree_separates_xor():
    dataset = xor_dataset(200, seed=1)
    X, y = dataset.matrix.require_imputed(), dataset.labels()
    tree = grow_classification_tree(X, y)
    assert np.array_equal(tree.predict(X), y)
    assert tree.used_features == {0, 1}
    assert tree.n_leaves >= 4


def test_tied_leaf_votes_positive():
    X = np.zeros((4, 1))
    tree = grow_classification_tree(X, np.array([0, 1, 0, 1]))
    assert tree.n_leaves == 1
    assert tree.predict(X).tolist() == [1.0] * 4


def test_forest_probability_is_fraction_of_votes(linear_problem):
    fm, y = linear_problem
    model = train_model(
        ModelFamily.RANDOM_FOREST, fm, y, {"n_trees": 7, "max_depth": 1}, seed=8
    )
    votes = model.predict_proba(fm) * 7
    assert np.allclose(votes, np.round(votes), rtol=0, atol=1e-9)
    for tree in model.trees:
        assert set(tree.predict(fm.values)) <= {0.0, 1.0}


def test_forest_is_independent_of_thread_count(linear_problem, socket_enabled):
    fm, y = linear_problem
    hyperparameters = {"n_trees": 6, "max_depth": 4}
    serial = train_model(ModelFamily.RANDOM_FOREST, fm, y, hyperparameters, seed=5)
    parallel = train_model(
        ModelFamily.RANDOM_FOREST, fm, y, hyperparameters, seed=5, threads=2
    )
    assert np.array_equal(serial.predict_proba(fm), parallel.predict_proba(fm))


def test_same_seed_same_model(linear_problem):
    fm, y = linear_problem
    first = train_model(ModelFamily.GBDT, fm, y, {"n_rounds": 5, "subsample": 0.5}, seed=9)
    second = train_model(ModelFamily.GBDT, fm, y, {"n_rounds": 5, "subsample": 0.5}, seed=9)
    assert model_to_dict(first) == model_to_dict(second)


@pytest.mark.parametrize(
    "family", [ModelFamily.GBDT, ModelFamily.RANDOM_FOREST, ModelFamily.LINEAR_SVM]
)
def test_saved_model_predicts_identically(tmp_path: Path, family, linear_problem):
    fm, y = linear_problem
    model = train_model(family, fm, y, FAST_HYPERPARAMETERS.get(family), seed=2)
    save_model(model, tmp_path / "model.json")
    loaded = load_model(tmp_path / "model.json")
    assert loaded.feature_names == model.feature_names
    assert np.array_equal(loaded.predict_proba(fm), model.predict_proba(fm))


def test_unknown_model_format_version(linear_problem):
    fm, y = linear_problem
    model = train_model(ModelFamily.LOGISTIC, fm, y)
    with pytest.raises(UnknownFormatVersionError):
        model_from_dict(model_to_dict(model) | {"format_version": 0})


def test_single_class_training():
    fm = FeatureMatrix.from_array([[1.0], [2.0], [3.0]], ("a",))
    with pytest.raises(SingleClassTrainingError):
        train_model(ModelFamily.LOGISTIC, fm, np.array([1, 1, 1]))


def test_feature_order_must_match(linear_problem):
    fm, y = linear_problem
    model = train_model(ModelFamily.NAIVE_BAYES, fm, y)
    with pytest.raises(FeatureMismatchError):
        model.predict_proba(fm.select_columns(["b", "a", "noise"]))


def test_svm_accepts_capital_c():
    assert params_for(ModelFamily.LINEAR_SVM, {"C": 0.5}) == SVMParams(c=0.5)


def test_unknown_hyperparameter_is_rejected():
    with pytest.raises(ConfigError, match="l2_lamda") as exc_info:
        params_for(ModelFamily.LOGISTIC, {"l2_lamda": 5.0})
    assert exc_info.value.field == "model.hyperparameters"


def test_keys_of_another_family_are_rejected():
    with pytest.raises(ConfigError, match="n_trees"):
        params_for(ModelFamily.LOGISTIC, {"l2_lambda": 1.0, "n_trees": 3})
