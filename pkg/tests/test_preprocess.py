from pathlib import Path

import numpy as np
import pytest

from sentidrop.artifacts import read_json, write_json
from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import AllMissingFeatureError, InvalidThresholdError, NotImputedError
from sentidrop.preprocess import (
    correlation_matrix,
    flag_outliers,
    impute_mean,
    ImputationLog,
    normalize,
    outlier_summary,
    ScalingMethod,
)


@pytest.fixture()
def matrix_with_gaps() -> FeatureMatrix:
    return FeatureMatrix.from_array(
        [[1.0, 10.0], [np.nan, 20.0], [3.0, np.nan], [4.0, 40.0]],
        ("a", "b"),
        ("S1", "S2", "S3", "S4"),
    )


class TestImputeMean:
    def test_fills_with_observed_means(self, matrix_with_gaps):
        imputed, log = impute_mean(matrix_with_gaps)
        assert imputed.is_imputed
        assert imputed.values[1, 0] == pytest.approx(8 / 3)
        assert imputed.values[2, 1] == pytest.approx(70 / 3)
        assert log.fill_counts == (1, 1)
        assert imputed.row_ids == matrix_with_gaps.row_ids

    def test_observed_cells_unchanged(self, matrix_with_gaps):
        imputed, _ = impute_mean(matrix_with_gaps)
        observed = ~matrix_with_gaps.missing_mask
        assert np.array_equal(
            imputed.values[observed], matrix_with_gaps.values[observed]
        )

    def test_log_applies_to_unseen_rows(self, matrix_with_gaps):
        _, log = impute_mean(matrix_with_gaps)
        unseen = FeatureMatrix.from_array([[np.nan, np.nan]], ("a", "b"))
        assert log.apply(unseen).values.tolist() == [list(log.fill_values)]

    def test_log_survives_sorted_json(self, tmp_path: Path):
        fm = FeatureMatrix.from_array(
            [[1.0, np.nan], [np.nan, 4.0], [3.0, 8.0]], ("zeta", "alpha")
        )
        _, log = impute_mean(fm)
        write_json(tmp_path / "preprocess.json", {"imputation": log.to_dict()})

        stored = read_json(tmp_path / "preprocess.json")["imputation"]
        restored = ImputationLog.from_dict(stored)
        assert restored == log
        assert restored.apply(fm).equals(log.apply(fm))

    @pytest.mark.parametrize("seed", range(5))
    def test_imputing_twice_changes_nothing(self, seed: int):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(30, 4))
        values[rng.random(values.shape) < 0.2] = np.nan
        values[0] = 1.0
        fm = FeatureMatrix.from_array(values, ("a", "b", "c", "d"))
        imputed, _ = impute_mean(fm)
        again, log = impute_mean(imputed)
        assert again.equals(imputed)
        assert log.fill_counts == (0, 0, 0, 0)

    def test_all_missing_feature(self):
        fm = FeatureMatrix.from_array([[1.0, np.nan], [2.0, np.nan]], ("a", "b"))
        with pytest.raises(AllMissingFeatureError) as exc_info:
            impute_mean(fm)
        assert exc_info.value.name == "b"


class TestFlagOutliers:
    def test_flags_extreme_cell(self):
        column = [0.0] * 19 + [100.0]
        fm = FeatureMatrix.from_array(np.column_stack([column, np.arange(20.0)]), ("a", "b"))
        flags = flag_outliers(fm, threshold=3.0)
        assert flags[:, 0].tolist() == [False] * 19 + [True]
        assert not flags[:, 1].any()
        assert outlier_summary(flags, fm.column_names) == {"a": 1, "b": 0}

    def test_constant_column_never_flags(self):
        fm = FeatureMatrix.from_array(np.full((5, 1), 7.0), ("a",))
        assert not flag_outliers(fm, threshold=0.01).any()

    @pytest.mark.parametrize("threshold", [0.0, -1.0])
    def test_threshold_must_be_positive(self, threshold: float):
        fm = FeatureMatrix.from_array([[1.0], [2.0]], ("a",))
        with pytest.raises(InvalidThresholdError):
            flag_outliers(fm, threshold)

    def test_requires_imputed(self, matrix_with_gaps):
        with pytest.raises(NotImputedError):
            flag_outliers(matrix_with_gaps)


class TestNormalize:
    def test_zscore(self):
        fm = FeatureMatrix.from_array([[1.0, 5.0], [3.0, 5.0]], ("a", "b"))
        scaled, params = normalize(fm, ScalingMethod.ZSCORE)
        assert scaled.values[:, 0].tolist() == [-1.0, 1.0]
        assert scaled.values[:, 1].tolist() == [5.0, 5.0]
        assert params.passthrough == ("b",)

    def test_minmax_and_invert(self):
        fm = FeatureMatrix.from_array([[2.0], [4.0], [6.0]], ("a",))
        scaled, params = normalize(fm, ScalingMethod.MINMAX)
        assert scaled.values[:, 0].tolist() == [0.0, 0.5, 1.0]
        assert np.allclose(params.invert(scaled).values, fm.values)

    def test_params_reapply_identically(self, matrix_with_gaps):
        imputed, _ = impute_mean(matrix_with_gaps)
        scaled, params = normalize(imputed)
        assert params.apply(imputed).equals(scaled)


class TestCorrelationMatrix:
    def test_with_label_column(self):
        fm = FeatureMatrix.from_array(
            [[1.0, 4.0, 2.0], [2.0, 3.0, 2.0], [3.0, 2.0, 2.0], [4.0, 1.0, 2.0]],
            ("up", "down", "flat"),
        )
        corr, names = correlation_matrix(fm, label=np.array([0, 0, 1, 1]))
        assert names == ("up", "down", "flat", "label")
        assert corr[0, 1] == pytest.approx(-1.0)
        assert corr[2, 0] == 0.0
        assert corr[2, 2] == 1.0
        assert np.allclose(corr, corr.T)
        assert corr[0, 3] == pytest.approx(0.8944, abs=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric_with_unit_diagonal(self, seed: int):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(25, 5))
        values[:, 2] = 3.0
        fm = FeatureMatrix.from_array(values, ("a", "b", "c", "d", "e"))
        corr, _ = correlation_matrix(fm, label=rng.integers(0, 2, size=25))
        assert corr.shape == (6, 6)
        assert np.array_equal(corr, corr.T)
        assert np.array_equal(np.diag(corr), np.ones(6))
        assert np.all(np.abs(corr) <= 1.0)
