from pathlib import Path

import numpy as np
import pytest

from sentidrop.ensemble import FusionMode, OutputFusionModel
from sentidrop.errors import ConfigError, UnknownFormatVersionError
from sentidrop.models import LogisticModel
from sentidrop.pipeline import (
    FittedPipeline,
    fit_pipeline,
    load_pipeline,
    PipelineSettings,
    prepare_training_data,
    rank_features,
    save_pipeline,
    SentimentSource,
)
from sentidrop.preprocess import OutlierTreatment
from sentidrop.sentiment import SENTIMENT_FEATURE_NAMES

from tests.helpers import assert_probabilities


@pytest.fixture(scope="module")
def split(synthetic):
    dataset, comments, _ = synthetic
    ids = dataset.student_ids
    return dataset.subset(ids[:120]), dataset.subset(ids[120:]), comments


def test_saved_pipeline_predicts_identically(tmp_path: Path, split, fast_settings):
    train, test, comments = split
    fitted = fit_pipeline(train, comments, fast_settings, seed=3)
    save_pipeline(fitted, tmp_path / "pipeline.json")
    loaded = load_pipeline(tmp_path / "pipeline.json")

    expected = fitted.predictions(test, comments)
    actual = loaded.predictions(test, comments)
    assert actual.student_ids == test.student_ids
    assert np.array_equal(actual.ensemble, expected.ensemble)
    assert np.array_equal(actual.members, expected.members)
    assert_probabilities(actual.ensemble)


def test_saved_pipeline_file_is_stable(tmp_path: Path, split, fast_settings):
    train, _, comments = split
    fitted = fit_pipeline(train, comments, fast_settings, seed=3)
    save_pipeline(fitted, tmp_path / "first.json")
    save_pipeline(load_pipeline(tmp_path / "first.json"), tmp_path / "second.json")

    first = (tmp_path / "first.json").read_bytes()
    assert first.endswith(b"}\n")
    assert b"\r\n" not in first
    assert (tmp_path / "second.json").read_bytes() == first
    loaded = load_pipeline(tmp_path / "second.json")
    assert loaded.imputation.column_names == fitted.imputation.column_names


def test_unknown_pipeline_format_version(split, fast_settings):
    train, _, comments = split
    d = fit_pipeline(train, comments, fast_settings.evolve(model="logistic")).to_dict()
    with pytest.raises(UnknownFormatVersionError):
        FittedPipeline.from_dict(d | {"format_version": 2})


def test_transforms_are_fitted_on_training_students_only(split, fast_settings):
    train, test, comments = split
    fitted = fit_pipeline(train, comments, fast_settings.evolve(model="logistic"))
    observed = ~train.matrix.missing_mask
    expected = np.where(observed, train.matrix.values, 0.0).sum(axis=0) / observed.sum(axis=0)
    assert np.allclose(fitted.imputation.fill_values, expected)

    X_test = fitted.transform(test, comments)
    assert X_test.row_ids == test.student_ids
    assert X_test.column_names == fitted.selected_columns
    assert X_test.is_imputed


def test_sentiment_columns_follow_tabular_columns(split, fast_settings):
    train, _, comments = split
    fitted = fit_pipeline(train, comments, fast_settings.evolve(model="logistic"))
    assert fitted.selected_columns == train.feature_names + SENTIMENT_FEATURE_NAMES
    assert fitted.scorer is not None


def test_without_sentiment_needs_no_comments(split, fast_settings):
    train, test, _ = split
    fitted = fit_pipeline(train, None, fast_settings.evolve(use_sentiment=False))
    assert fitted.selected_columns == train.feature_names
    assert fitted.scorer is None
    assert fitted.predict_proba(test).shape == (test.n,)


def test_training_scorer_needs_comments(split, fast_settings):
    train, _, _ = split
    with pytest.raises(ConfigError) as exc_info:
        fit_pipeline(train, None, fast_settings)
    assert exc_info.value.field == "paths.comments"


def test_noise_block_is_fixed_per_student(split, fast_settings):
    train, test, _ = split
    settings = fast_settings.evolve(
        model="logistic", sentiment_source=SentimentSource.NOISE
    )
    fitted = fit_pipeline(train, None, settings, seed=2)
    whole = fitted.merged_features(test)
    part = fitted.merged_features(test.subset(test.student_ids[:5]))
    assert np.array_equal(whole.values[:5], part.values)


def test_top_k_selects_columns_in_input_order(split, fast_settings):
    train, _, comments = split
    fitted = fit_pipeline(train, comments, fast_settings.evolve(top_k=4), seed=1)
    assert len(fitted.selected_columns) == 4
    merged_order = train.feature_names + SENTIMENT_FEATURE_NAMES
    positions = [merged_order.index(c) for c in fitted.selected_columns]
    assert positions == sorted(positions)
    assert len(fitted.ranking) == len(merged_order)
    assert set(fitted.selected_columns) == set(fitted.ranking.names[:4])


def test_rank_features_covers_every_column(split, fast_settings):
    train, _, comments = split
    ranking = rank_features(train, comments, fast_settings, seed=1)
    assert set(ranking.names) == set(train.feature_names + SENTIMENT_FEATURE_NAMES)
    importances = [value for _, value in ranking.items]
    assert importances == sorted(importances, reverse=True)


def test_output_fusion(split, fast_settings):
    train, test, comments = split
    fitted = fit_pipeline(train, comments, fast_settings.evolve(fusion=FusionMode.OUTPUT))
    assert isinstance(fitted.model, OutputFusionModel)
    assert_probabilities(fitted.predict_proba(test, comments))


def test_single_family_has_no_member_predictions(split, fast_settings):
    train, test, comments = split
    fitted = fit_pipeline(train, comments, fast_settings.evolve(model="logistic"))
    assert isinstance(fitted.model, LogisticModel)
    with pytest.raises(ConfigError):
        fitted.predictions(test, comments)


def test_outlier_rows_removed_from_training(split, fast_settings):
    train, _, _ = split
    settings = fast_settings.evolve(
        use_sentiment=False,
        outlier_threshold=2.0,
        outlier_treatment=OutlierTreatment.REMOVE,
    )
    data = prepare_training_data(train, None, settings)
    assert data.X.n_rows < train.n
    assert data.y.shape == (data.X.n_rows,)
    assert sum(data.outliers.values()) > 0


@pytest.mark.parametrize(
    "changes",
    [{"model": "transformer"}, {"top_k": 0}, {"model": "logistic", "fusion": FusionMode.OUTPUT}],
)
def test_invalid_settings(changes):
    with pytest.raises(ConfigError):
        PipelineSettings(**changes)


def test_settings_from_dict(fast_settings):
    settings = fast_settings.evolve(top_k=3, exclude_columns=("age",))
    assert PipelineSettings.from_dict(settings.to_dict()) == settings
