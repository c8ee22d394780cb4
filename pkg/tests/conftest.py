from pathlib import Path
from unittest.mock import Mock

import pytest
from pytest_socket import disable_socket

from sentidrop.core_data import CommentSet, Dataset
from sentidrop.pipeline import PipelineSettings
from sentidrop.synth import generate, GroundTruth, preset

from tests.helpers import FAST_HYPERPARAMETERS, make_comment, make_dataset



def pytest_runtest_setup():
    disable_socket()


@pytest.fixture(autouse=True)
def monkeypatch_directories(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    monkeypatch.setattr(
        "platformdirs.user_config_path", Mock(return_value=tmp_path / "config")
    )


@pytest.fixture(scope="session")
def synthetic() -> tuple[Dataset, CommentSet, GroundTruth]:
    return generate(preset("default", n_students=160, n_features=8, seed=7))


@pytest.fixture(scope="session")
def synthetic_dataset(synthetic) -> Dataset:
    return synthetic[0]


@pytest.fixture(scope="session")
def synthetic_comments(synthetic) -> CommentSet:
    return synthetic[1]


@pytest.fixture()
def fast_settings() -> PipelineSettings:
    return PipelineSettings(
        hyperparameters=FAST_HYPERPARAMETERS,
        background_size=10,
        selection_rows=20,
        n_permutations=4,
    )


@pytest.fixture()
def toy_dataset() -> Dataset:
    return make_dataset(
        {
            "S1": ({"minutes": 10.0, "days": 1.0}, 1),
            "S2": ({"minutes": 50.0, "days": None}, 0),
            "S3": ({"minutes": None, "days": 5.0}, 0),
            "S4": ({"minutes": 30.0, "days": 3.0}, 1),
        }
    )


@pytest.fixture()
def toy_comments() -> CommentSet:
    return CommentSet(
        [
            make_comment("S1", "2024-09-03T10:00:00Z", "I am lost and stressed", "negative"),
            make_comment("S1", "2024-11-20T10:00:00Z", "The exam went fine"),
            make_comment("S2", "2024-09-10T08:30:00Z", "Great lectures, really enjoying it", "positive"),
            make_comment("S4", "2024-10-01T12:00:00Z", "Deadline moved to Friday", "neutral"),
        ]
    )
