from pathlib import Path

import pytest
import toml

from sentidrop.config import build_config, load_config_from_file, update_nested_dict
from sentidrop.errors import ConfigError
from sentidrop.pipeline import ENSEMBLE, SentimentSource


def test_defaults():
    config = build_config()
    assert config.settings.model == ENSEMBLE
    assert config.settings.sentiment_source is SentimentSource.TRAIN
    assert config.cv.k == 5
    assert config.output_dir == Path("sentidrop-run")
    assert config.tabular is None
    assert config.ablation_models[-1] == ENSEMBLE


def test_first_layer_wins_and_sections_merge():
    flags = {"cv": {"k": 3}, "seed": 7}
    from_file = {"cv": {"k": 10}, "model": {"name": "gbdt"}}
    config = build_config(flags, from_file)
    assert config.cv.k == 3
    assert config.cv.strategy == "group_kfold"
    assert config.settings.model == "gbdt"
    assert config.seed == 7


def test_nested_hyperparameters():
    config = build_config({"model": {"hyperparameters": {"gbdt": {"n_rounds": 5}}}})
    assert config.settings.hyperparameters == {"gbdt": {"n_rounds": 5}}
    assert config.settings.decision_threshold == 0.5


def test_load_toml(tmp_path: Path):
    path = tmp_path / "config.toml"
    path.write_text(toml.dumps({"seed": 3, "sentiment": {"enabled": False}, "cv": {"k": 4}}))
    config = build_config(load_config_from_file(path))
    assert config.seed == 3
    assert not config.settings.use_sentiment
    assert config.cv.k == 4


def test_load_json(tmp_path: Path):
    path = tmp_path / "config.json"
    path.write_text('{"explain": {"mode": "exact", "rows": null}}')
    config = build_config(load_config_from_file(path))
    assert config.explain.mode == "exact"
    assert config.explain.rows is None


def test_unparsable_file(tmp_path: Path):
    path = tmp_path / "config.json"
    path.write_text("{seed: 1")
    with pytest.raises(ConfigError) as exc_info:
        load_config_from_file(path)
    assert exc_info.value.field == "config"


def test_hash_ignores_threads_and_output():
    base = build_config()
    assert build_config({"threads": 8, "paths": {"output": "elsewhere"}}).hash == base.hash
    assert build_config({"seed": 1}).hash != base.hash
    assert "threads" not in base.canonical


@pytest.mark.parametrize(
    "layer,field",
    [
        ({"cv": {"strategy": "bootstrap"}}, "cv.strategy"),
        ({"cv": {"k": 1}}, "cv.k"),
        ({"cv": {"strategy": "year_holdout"}}, "cv.year_column"),
        ({"model": {"name": "transformer"}}, "model"),
        ({"preprocess": {"scaling": "robust"}}, "config"),
        (
            {"model": {"hyperparameters": {"logistic": {"l2_lamda": 5.0}}}},
            "model.hyperparameters",
        ),
        ({"model": {"hyperparameters": {"svm": {"c": 1.0}}}}, "model.hyperparameters"),
    ],
)
def test_invalid_values(layer: dict, field: str):
    with pytest.raises(ConfigError) as exc_info:
        build_config(layer)
    assert exc_info.value.field == field


def test_year_column_is_excluded_from_features():
    config = build_config(
        {"cv": {"strategy": "year_holdout", "year_column": "cohort_year", "test_year": 2023}}
    )
    assert config.settings.exclude_columns == ("cohort_year",)


def test_require_path(tmp_path: Path):
    with pytest.raises(ConfigError, match="a path is required"):
        build_config().require_path("paths.tabular")

    missing = tmp_path / "students.csv"
    config = build_config({"paths": {"tabular": str(missing)}})
    with pytest.raises(ConfigError, match="file does not exist"):
        config.require_path("paths.tabular")

    missing.write_text("student_id\n")
    assert config.require_path("paths.tabular") == missing


def test_update_nested_dict():
    base = {"a": {"b": 1, "c": 2}, "d": 3}
    assert update_nested_dict(base, {"a": {"b": 5}}) == {"a": {"b": 5, "c": 2}, "d": 3}
    assert base["a"]["b"] == 1
