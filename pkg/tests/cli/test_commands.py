import json
from pathlib import Path

import pandas as pd

from sentidrop._version import __version__

from tests.helpers import find_error


def test_no_arguments_prints_help(sentidrop_cli_invoke):
    result = sentidrop_cli_invoke([])
    assert result.exit_code == 0
    assert "Dropout prediction" in result.output
    assert "select-features" in result.output


def test_version(sentidrop_cli_invoke):
    result = sentidrop_cli_invoke(["--version"])
    assert result.exit_code == 0
    assert result.output.strip() == __version__


def test_missing_comments_is_reported_as_json(sentidrop_cli_invoke):
    result = sentidrop_cli_invoke(["score", "--no-config", "-o", "run"])
    assert result.exit_code == 1
    error = find_error(result.output)
    assert error["code"] == "Config"
    assert error["module"] == "cli"
    assert "paths.comments" in error["message"]


def test_unreadable_config_file(sentidrop_cli_invoke, tmp_path: Path):
    (tmp_path / "broken.json").write_text("{")
    result = sentidrop_cli_invoke(["gen", "-C", "broken.json"])
    assert result.exit_code == 1
    assert find_error(result.output)["code"] == "Config"


def test_config_and_no_config_are_exclusive(sentidrop_cli_invoke, fast_config_path):
    result = sentidrop_cli_invoke(["gen", "-C", str(fast_config_path), "--no-config"])
    assert result.exit_code == 2


def test_report_without_manifests(sentidrop_cli_invoke, tmp_path: Path):
    (tmp_path / "empty").mkdir()
    result = sentidrop_cli_invoke(["report", "--no-config", "empty"])
    assert result.exit_code == 1
    assert find_error(result.output)["code"] == "MissingArtifacts"


def test_gen(sentidrop_cli_invoke, fast_config_path, tmp_path: Path):
    result = sentidrop_cli_invoke(
        ["gen", "-C", str(fast_config_path), "-n", "40", "--seed", "5", "-o", "data"]
    )
    assert result.exit_code == 0, result.output
    assert "Generated 40 students" in result.output
    students = pd.read_csv(tmp_path / "data" / "students.csv")
    assert len(students) == 40
    manifest = json.loads((tmp_path / "data" / "gen.manifest.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["config"]["synth"]["n_students"] == 40


def run_pipeline(invoke, config_path: Path, out: str) -> None:
    for command in ("gen", "pipeline"):
        result = invoke([command, "-C", str(config_path), "-o", out, "--seed", "3"])
        assert result.exit_code == 0, result.output


PIPELINE_ARTIFACTS = [
    "predictions.csv",
    "at_risk.csv",
    "metrics.json",
    "cv_folds.csv",
    "ttest.json",
    "shap.csv",
    "feature_ranking.csv",
    "ablation.csv",
    "report_radar.csv",
    "report_heatmap.csv",
    "pipeline.manifest.json",
]


def test_pipeline_writes_artifacts(sentidrop_cli_invoke, fast_config_path, tmp_path: Path):
    run_pipeline(sentidrop_cli_invoke, fast_config_path, "run")
    for filename in PIPELINE_ARTIFACTS:
        assert (tmp_path / "run" / filename).exists(), filename
    manifest = json.loads((tmp_path / "run" / "pipeline.manifest.json").read_text())
    assert set(PIPELINE_ARTIFACTS[:-1]) <= set(manifest["artifacts"].values())


def test_pipeline_is_reproducible(sentidrop_cli_invoke, fast_config_path, tmp_path: Path):
    run_pipeline(sentidrop_cli_invoke, fast_config_path, "run1")
    run_pipeline(sentidrop_cli_invoke, fast_config_path, "run2")
    for filename in ("metrics.json", "predictions.csv", "shap.csv"):
        first = (tmp_path / "run1" / filename).read_bytes()
        assert first == (tmp_path / "run2" / filename).read_bytes()
