from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.special import expit

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import (
    BadKError,
    EmptyBackgroundError,
    EmptyInputError,
    TooManyFeaturesError,
)
from sentidrop.explain import (
    background_sample,
    explain_rows,
    ImportanceRanking,
    rank_importance,
    select_top_k,
    shap_exact,
    shap_retrained,
    shap_sampling,
    ShapExplanation,
    ShapMode,
    write_explanations,
)

WEIGHTS = np.array([2.0, -1.0, 0.5])


def linear(Z: np.ndarray) -> np.ndarray:
    return Z @ WEIGHTS + 0.3


def interacting(Z: np.ndarray) -> np.ndarray:
    """Ignores the last column."""
    return expit(Z[:, 0] * Z[:, 1] + Z[:, 2])


@pytest.fixture()
def background() -> np.ndarray:
    return np.random.default_rng(0).normal(size=(25, 4))


@pytest.fixture()
def instance() -> np.ndarray:
    return np.array([1.5, -0.5, 0.7, 3.0])


class TestShapExact:
    def test_linear_closed_form(self, background, instance):
        bg, x = background[:, :3], instance[:3]
        explanation = shap_exact(linear, x, bg)
        assert np.allclose(explanation.values, WEIGHTS * (x - bg.mean(axis=0)))
        assert explanation.feature_names == ("x0", "x1", "x2")

    def test_efficiency(self, background, instance):
        explanation = shap_exact(interacting, instance, background)
        total = explanation.base_value + explanation.values.sum()
        assert total == pytest.approx(interacting(instance.reshape(1, -1))[0])
        assert explanation.base_value == pytest.approx(interacting(background).mean())

    def test_dummy_feature_gets_zero(self, background, instance):
        explanation = shap_exact(interacting, instance, background)
        assert explanation.values[3] == pytest.approx(0.0, abs=1e-12)

    def test_too_many_features(self):
        with pytest.raises(TooManyFeaturesError):
            shap_exact(lambda Z: Z.sum(axis=1), np.zeros(21), np.zeros((2, 21)))

    def test_empty_background(self, instance):
        with pytest.raises(EmptyBackgroundError):
            shap_exact(interacting, instance, np.empty((0, 4)))


class TestShapSampling:
    def test_linear_model_is_exact(self, background, instance):
        bg, x = background[:, :3], instance[:3]
        explanation = shap_sampling(linear, x, bg, n_permutations=5, seed=1)
        assert np.allclose(explanation.values, WEIGHTS * (x - bg.mean(axis=0)))
        assert np.allclose(explanation.standard_errors, 0.0)

    def test_efficiency_holds_for_any_sample(self, background, instance):
        explanation = shap_sampling(interacting, instance, background, n_permutations=3)
        total = explanation.base_value + explanation.values.sum()
        assert total == pytest.approx(interacting(instance.reshape(1, -1))[0])

    def test_converges_to_exact(self, background, instance):
        exact = shap_exact(interacting, instance, background)
        sampled = shap_sampling(interacting, instance, background, n_permutations=400, seed=3)
        assert np.allclose(sampled.values, exact.values, atol=0.02)

    def test_same_seed_same_values(self, background, instance):
        first = shap_sampling(interacting, instance, background, 10, seed=8)
        second = shap_sampling(interacting, instance, background, 10, seed=8)
        assert np.array_equal(first.values, second.values)


class TestShapRetrained:
    @staticmethod
    def fit_by_subset_size(X: np.ndarray, y: np.ndarray):
        size = X.shape[1]
        return lambda Z: np.full(len(Z), size / 2)

    def test_empty_subset_is_positive_rate(self):
        X = np.zeros((2, 2))
        explanation = shap_retrained(self.fit_by_subset_size, X, np.array([0, 1]), X[0])
        assert explanation.base_value == 0.5
        assert explanation.values.tolist() == [0.25, 0.25]

    def test_feature_limit(self):
        X = np.zeros((2, 5))
        with pytest.raises(TooManyFeaturesError):
            shap_retrained(self.fit_by_subset_size, X, np.array([0, 1]), X[0])


class TestBackgroundSample:
    def test_all_rows_when_size_not_smaller(self):
        assert background_sample(5, size=5).tolist() == [0, 1, 2, 3, 4]

    def test_stratified_and_sorted(self):
        labels = np.array([1] * 10 + [0] * 90)
        rows = background_sample(100, labels, size=20, seed=2)
        assert len(rows) == 20
        assert np.all(np.diff(rows) > 0)
        assert labels[rows].sum() == 2

    def test_empty(self):
        with pytest.raises(EmptyBackgroundError):
            background_sample(0)


def test_explain_rows_keeps_row_order_and_ids(background):
    X = FeatureMatrix.from_array(
        background[:3], ("a", "b", "c", "d"), ("S1", "S2", "S3")
    )
    explanations = explain_rows(
        interacting, X, background, ShapMode.SAMPLING, n_permutations=4, seed=1
    )
    assert [e.instance_id for e in explanations] == ["S1", "S2", "S3"]
    assert explanations[0].feature_names == ("a", "b", "c", "d")


def make_explanation(instance_id: str, values: list[float]) -> ShapExplanation:
    return ShapExplanation(instance_id, np.array(values), 0.1, ("b", "a", "c"))


class TestRanking:
    def test_mean_absolute_value_ties_by_name(self):
        ranking = rank_importance(
            [make_explanation("1", [0.2, -0.2, 0.0]), make_explanation("2", [-0.2, 0.2, 0.1])]
        )
        assert ranking.names == ("a", "b", "c")
        assert ranking.importance("c") == pytest.approx(0.05)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            rank_importance([])

    def test_select_top_k(self):
        ranking = ImportanceRanking((("a", 0.3), ("b", 0.2), ("c", 0.1)))
        assert select_top_k(ranking, 2) == ("a", "b")

    @pytest.mark.parametrize("k", [0, 4])
    def test_bad_k(self, k: int):
        ranking = ImportanceRanking((("a", 0.3), ("b", 0.2), ("c", 0.1)))
        with pytest.raises(BadKError):
            select_top_k(ranking, k)


def test_write_explanations(tmp_path: Path):
    write_explanations(
        tmp_path / "shap.csv", [make_explanation("S1", [0.1, 0.2, 0.3])]
    )
    frame = pd.read_csv(tmp_path / "shap.csv", dtype={"instance_id": str})
    assert list(frame.columns) == ["instance_id", "base_value", "b", "a", "c"]
    assert frame.loc[0, "instance_id"] == "S1"
