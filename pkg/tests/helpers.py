import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from sentidrop.core_data import Comment, Dataset, StudentRecord
from sentidrop.types import SentimentClass
from sentidrop.utils.dates import parse_iso_datetime

#: Small model sizes that keep pipeline tests fast.
FAST_HYPERPARAMETERS: dict[str, dict[str, Any]] = {
    "random_forest": {"n_trees": 5, "max_depth": 4},
    "gbdt": {"n_rounds": 10, "max_depth": 2},
    "logistic": {"max_epochs": 300},
    "linear_svm": {"epochs": 3},
}

#: A configuration file for quick end-to-end runs.
FAST_CONFIG: dict[str, Any] = {
    "synth": {"preset": "default", "n_students": 120, "n_features": 8},
    "model": {"hyperparameters": FAST_HYPERPARAMETERS},
    "cv": {"k": 3},
    "selection": {"background_size": 10, "rows": 20, "n_permutations": 4},
    "explain": {"background_size": 10, "rows": 10, "n_permutations": 4},
    "grid": {"family": "logistic", "params": {"l2_lambda": [0.01, 1.0]}},
    "ablation": {"models": ["logistic", "ensemble"], "noise_control": False},
}


def make_comment(
    student_id: str, timestamp: str, text: str, gold_label: str | None = None
) -> Comment:
    return Comment(
        student_id,
        parse_iso_datetime(timestamp),
        text,
        SentimentClass(gold_label) if gold_label else None,
    )


def make_dataset(
    rows: dict[str, tuple[dict[str, float | None], int | None]],
) -> Dataset:
    records = tuple(
        StudentRecord(student_id, features, label)
        for student_id, (features, label) in rows.items()
    )
    return Dataset(records, tuple(next(iter(rows.values()))[0]))


def write_config(path: Path, config: dict[str, Any]) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f)
    return path


def find_error(output: str) -> dict[str, str]:
    """Finds the error JSON printed by a failed command."""
    for line in reversed(output.splitlines()):
        if line.startswith("{"):
            try:
                error = json.loads(line)
            except json.JSONDecodeError:
                continue
            if "code" in error:
                return error
    raise AssertionError(f"No error JSON in output:\n{output}")


def assert_probabilities(values: Any) -> None:
    values = np.asarray(values)
    assert np.all(np.isfinite(values))
    assert np.all((values >= 0.0) & (values <= 1.0))


def approx(expected: float, abs: float = 1e-4):
    return pytest.approx(expected, abs=abs)
