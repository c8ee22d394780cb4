import json
from pathlib import Path

import numpy as np
import pytest

from sentidrop.core_data import load_comments, load_tabular, validate
from sentidrop.errors import BadConfigError
from sentidrop.synth import (
    ENGAGEMENT_COLUMNS,
    generate,
    preset,
    PRESETS,
    SynthConfig,
    write_synthetic,
    xor_dataset,
    YEAR_COLUMN,
)


def small(name: str = "default", **overrides) -> SynthConfig:
    return preset(name, **({"n_students": 150, "n_features": 7, "seed": 11} | overrides))


def test_same_seed_same_data():
    first, first_comments, _ = generate(small())
    second, second_comments, _ = generate(small())
    assert first.equals(second)
    assert first_comments == second_comments


def test_seed_changes_data():
    first, _, _ = generate(small(seed=1))
    second, _, _ = generate(small(seed=2))
    assert not first.equals(second)


def test_columns_and_ids():
    dataset, comments, truth = generate(small(cohort_years=[2022, 2023]))
    assert dataset.feature_names[:4] == ENGAGEMENT_COLUMNS
    assert dataset.feature_names[-1] == YEAR_COLUMN
    assert dataset.m == 8
    assert dataset.student_ids[0] == "S00000"
    assert dataset.has_labels
    assert truth.student_ids == dataset.student_ids
    assert validate(dataset, comments).orphan_student_ids == ()


def test_base_rate_is_calibrated():
    _, _, truth = generate(small(n_students=2000))
    assert truth.dropout_probability.mean() == pytest.approx(0.25, abs=1e-6)


def test_gold_labels_cover_every_class():
    _, comments, _ = generate(small())
    assert {str(c.gold_label) for c in comments.labeled()} == {
        "negative",
        "neutral",
        "positive",
    }


def test_null_preset_has_no_effects():
    config = small("null")
    assert set(config.weights.values()) == {0.0}
    _, _, truth = generate(config)
    assert np.allclose(truth.dropout_probability, 0.25)


@pytest.mark.parametrize("name", list(PRESETS))
def test_presets_generate(name: str):
    dataset, _, _ = generate(small(name, n_students=30))
    assert dataset.n == 30


@pytest.mark.parametrize(
    "options",
    [
        {"n_students": 0},
        {"n_features": 4},
        {"dropout_base_rate": 1.0},
        {"gold_fraction": 1.5},
        {"weights": {"unknown": 1.0}},
        {"neutral_phrases": ("really enjoyed the lectures",)},
        {"no_such_option": 1},
    ],
)
def test_bad_config(options):
    with pytest.raises(BadConfigError):
        SynthConfig.from_dict(options)


def test_unknown_preset():
    with pytest.raises(BadConfigError):
        preset("optimistic")


def test_xor_dataset():
    dataset = xor_dataset(100, seed=3)
    X, y = dataset.matrix.values, dataset.labels()
    assert dataset.feature_names == ("x1", "x2")
    assert np.array_equal(y, ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int))


def test_write_synthetic(tmp_path: Path):
    dataset, comments, truth = generate(small(n_students=20))
    paths = write_synthetic(tmp_path / "run", dataset, comments, truth)
    assert load_tabular(paths.tabular).equals(dataset)
    assert load_comments(paths.comments) == comments
    students = json.loads(paths.ground_truth.read_text())["students"]
    assert [s["student_id"] for s in students] == list(dataset.student_ids)
