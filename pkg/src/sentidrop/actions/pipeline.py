"""End-to-end run: every stage, in order, on one configuration."""

from collections.abc import Callable

import structlog

from sentidrop.actions.common import finish_stage, prepare_output_dir, StageResult
from sentidrop.actions.data import preprocess_dataset
from sentidrop.actions.evaluate import run_ablation, run_cross_validation
from sentidrop.actions.model import (
    explain_predictions,
    predict_dropout,
    select_features,
    train_pipeline,
)
from sentidrop.actions.report import build_report
from sentidrop.actions.sentiment import (
    run_sentiment_ttest,
    score_sentiment,
    train_sentiment_scorer,
)
from sentidrop.config import PipelineConfig
from sentidrop.pipeline import SentimentSource
from sentidrop.progress import NullProgressReporter, ProgressReporter

logger = structlog.get_logger(__name__)

Stage = Callable[[PipelineConfig], StageResult]


def pipeline_stages(
    config: PipelineConfig, progress_reporter: ProgressReporter
) -> list[tuple[str, Stage]]:
    """Stages run by :func:`run_pipeline`, in order.

    Sentiment stages are skipped when sentiment is disabled; the scorer is
    only trained for the ``train`` source and nothing is scored for the
    noise control source.
    """
    settings = config.settings
    stages: list[tuple[str, Stage]] = [("preprocess", preprocess_dataset)]
    if settings.use_sentiment and settings.sentiment_source is not SentimentSource.NOISE:
        if settings.sentiment_source is SentimentSource.TRAIN:
            stages.append(("train-scorer", train_sentiment_scorer))
        stages += [("score", score_sentiment), ("ttest", run_sentiment_ttest)]
    stages += [
        ("cv", lambda c: run_cross_validation(c, progress_reporter)),
        ("train", train_pipeline),
        ("predict", predict_dropout),
        ("explain", explain_predictions),
        ("select-features", select_features),
        ("ablate", lambda c: run_ablation(c, progress_reporter)),
        ("report", build_report),
    ]
    return stages


def run_pipeline(
    config: PipelineConfig, progress_reporter: ProgressReporter | None = None
) -> StageResult:
    """Runs the stages in sequence, as the separate commands would.

    Each stage writes its own manifest; the ``pipeline`` manifest lists the
    artifacts of all of them.
    """
    if progress_reporter is None:
        progress_reporter = NullProgressReporter()

    prepare_output_dir(config)
    results: dict[str, StageResult] = {}
    artifacts: dict[str, str] = {}
    for name, stage in pipeline_stages(config, progress_reporter):
        logger.debug("Running stage", stage=name)
        results[name] = stage(config)
        artifacts |= results[name].manifest.artifacts
    return finish_stage(config, "pipeline", artifacts, results)
