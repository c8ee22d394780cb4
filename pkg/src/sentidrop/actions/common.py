"""Input resolution and manifest bookkeeping shared by all stages."""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple

import pandas as pd
import structlog

from sentidrop.artifacts import RunManifest, write_manifest
from sentidrop.config import PipelineConfig
from sentidrop.core_data import CommentSet, Dataset, load_comments, load_tabular
from sentidrop.errors import ConfigError
from sentidrop.evaluation import FoldPlan, group_kfold, year_holdout
from sentidrop.pipeline import SentimentSource
from sentidrop.sentiment import (
    load_external_scores,
    load_scorer,
    SentimentScore,
    SentimentScorer,
)

logger = structlog.get_logger(__name__)

#: Files that stages fall back to when a path option is unset.
FALLBACK_FILENAMES: dict[str, str] = {
    "paths.tabular": "students.csv",
    "paths.comments": "comments.jsonl",
    "paths.scorer": "scorer.json",
    "paths.model": "pipeline.json",
}

_CONFIG_ATTRIBUTES = {
    "paths.tabular": "tabular",
    "paths.comments": "comments",
    "paths.scorer": "scorer_path",
    "paths.scores": "scores_path",
    "paths.model": "model_path",
}


class StageResult(NamedTuple):
    manifest: RunManifest
    value: Any


@dataclass(frozen=True, eq=False)
class Inputs:
    dataset: Dataset
    comments: CommentSet | None = None
    scorer: SentimentScorer | None = None
    external_scores: list[SentimentScore] | None = None


def find_input(config: PipelineConfig, field: str) -> Path | None:
    """Gets an input path: the configured one, else a file in the run directory.

    Raises:
        ConfigError: If a configured path does not exist.
    """
    if getattr(config, _CONFIG_ATTRIBUTES[field]) is not None:
        return config.require_path(field)
    if (filename := FALLBACK_FILENAMES.get(field)) is not None:
        candidate = config.output_dir / filename
        if candidate.exists():
            logger.debug("Using run directory input", field=field, path=str(candidate))
            return candidate
    return None


def require_input(config: PipelineConfig, field: str) -> Path:
    """Like :func:`find_input`, but the input must exist.

    Raises:
        ConfigError: Naming the field, if no file is found.
    """
    if (path := find_input(config, field)) is None:
        raise ConfigError(field, "a path is required")
    return path


def load_inputs(config: PipelineConfig, sentiment: bool | None = None) -> Inputs:
    """Loads the tabular data and what the sentiment source needs.

    Args:
        config: A run configuration.
        sentiment: Whether sentiment inputs are needed; by default, whether
          sentiment is enabled.

    Raises:
        ConfigError: If a required input is missing.
    """
    settings = config.settings
    if sentiment is None:
        sentiment = settings.use_sentiment

    dataset = load_tabular(require_input(config, "paths.tabular"))
    comments = scorer = external_scores = None
    if sentiment:
        match settings.sentiment_source:
            case SentimentSource.TRAIN:
                comments = load_comments(require_input(config, "paths.comments"))
            case SentimentSource.SCORER:
                comments = load_comments(require_input(config, "paths.comments"))
                scorer = load_scorer(require_input(config, "paths.scorer"))
            case SentimentSource.EXTERNAL:
                external_scores = load_external_scores(
                    require_input(config, "paths.scores"), settings.class_threshold
                )
    return Inputs(dataset, comments, scorer, external_scores)


def fold_plan(config: PipelineConfig, dataset: Dataset) -> FoldPlan:
    if config.cv.strategy == "year_holdout":
        return year_holdout(dataset, config.cv.year_column, config.cv.test_year)
    return group_kfold(dataset.student_ids, config.cv.k, config.seed)


def prepare_output_dir(config: PipelineConfig) -> Path:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return config.output_dir


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def finish_stage(
    config: PipelineConfig, command: str, artifacts: dict[str, str], value: Any = None
) -> StageResult:
    """Writes the stage manifest and wraps the stage output."""
    manifest = RunManifest(command, config.canonical, config.seed, artifacts)
    write_manifest(config.output_dir, manifest)
    logger.info("Finished stage", command=command, artifacts=sorted(artifacts))
    return StageResult(manifest, value)

