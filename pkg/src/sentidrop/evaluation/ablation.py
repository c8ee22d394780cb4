"""With/without-sentiment comparison of every model family on shared folds."""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import pandas as pd
import structlog

from sentidrop.core_data import CommentSet, Dataset
from sentidrop.ensemble import FusionMode
from sentidrop.evaluation.folds import FoldPlan
from sentidrop.evaluation.metrics import METRIC_NAMES
from sentidrop.evaluation.search import cross_validate, CrossValidationResult
from sentidrop.pipeline import ENSEMBLE, PipelineSettings, SentimentSource
from sentidrop.progress import NullProgressReporter, ProgressReporter
from sentidrop.sentiment import SentimentScore, SentimentScorer
from sentidrop.types import ModelFamily

logger = structlog.get_logger(__name__)

#: Compared models, in report order.
ABLATION_MODELS: tuple[str, ...] = (
    str(ModelFamily.LOGISTIC),
    str(ModelFamily.RANDOM_FOREST),
    str(ModelFamily.GBDT),
    str(ModelFamily.NAIVE_BAYES),
    str(ModelFamily.LINEAR_SVM),
    ENSEMBLE,
)


class Arm(StrEnum):
    WITHOUT_SENTIMENT = "without_sentiment"
    WITH_SENTIMENT = "with_sentiment"
    #: Sentiment block replaced by random noise.
    NOISE_CONTROL = "noise_control"


def arm_settings(settings: PipelineSettings, model: str, arm: Arm) -> PipelineSettings:
    """Pipeline settings of one model in one arm; only the sentiment block differs."""
    changes: dict[str, Any] = {"model": model}
    if model != ENSEMBLE:
        changes["fusion"] = FusionMode.FEATURE
    match arm:
        case Arm.WITHOUT_SENTIMENT:
            changes["use_sentiment"] = False
        case Arm.WITH_SENTIMENT:
            changes["use_sentiment"] = True
        case Arm.NOISE_CONTROL:
            changes["use_sentiment"] = True
            changes["sentiment_source"] = SentimentSource.NOISE
    return settings.evolve(**changes)


@dataclass(frozen=True, eq=False)
class AblationReport:
    models: tuple[str, ...]
    arms: tuple[Arm, ...]
    results: dict[tuple[str, Arm], CrossValidationResult]

    def mean(self, model: str, arm: Arm, metric: str) -> float:
        return self.results[model, arm].mean(metric, model)

    def deltas(self, arm: Arm = Arm.WITH_SENTIMENT) -> pd.DataFrame:
        """Mean metric differences of ``arm`` against the no-sentiment arm."""
        rows = []
        for model in self.models:
            for metric in METRIC_NAMES:
                baseline = self.mean(model, Arm.WITHOUT_SENTIMENT, metric)
                value = self.mean(model, arm, metric)
                rows.append(
                    {
                        "model": model,
                        "metric": metric,
                        str(Arm.WITHOUT_SENTIMENT): baseline,
                        str(arm): value,
                        "delta": value - baseline,
                    }
                )
        return pd.DataFrame(rows)

    def heatmap(self) -> pd.DataFrame:
        """One row per model, metric and arm with the mean held-out value."""
        rows = [
            {
                "model": model,
                "metric": metric,
                "arm": str(arm),
                "value": self.mean(model, arm, metric),
            }
            for model in self.models
            for metric in METRIC_NAMES
            for arm in self.arms
        ]
        return pd.DataFrame(rows)

    def flat(self) -> pd.DataFrame:
        """One row per model, fold and arm with every metric."""
        rows = []
        for model in self.models:
            for arm in self.arms:
                for report in self.results[model, arm].reports_for(model):
                    row = {"model": model, "fold": report.fold, "arm": str(arm)}
                    rows.append(row | report.values)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            model: {
                str(arm): self.results[model, arm].to_dict() for arm in self.arms
            }
            for model in self.models
        }


def ablation(
    dataset: Dataset,
    comments: CommentSet | None,
    settings: PipelineSettings,
    plan: FoldPlan,
    models: Sequence[str] = ABLATION_MODELS,
    seed: int = 0,
    threads: int = 1,
    noise_control: bool = True,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
    progress_reporter: ProgressReporter | None = None,
) -> AblationReport:
    """Cross-validates each model with and without the sentiment block.

    Every arm uses the same fold plan and seed, so arms see identical
    training and test students and differ only in columns.
    """
    if progress_reporter is None:
        progress_reporter = NullProgressReporter()

    arms = (Arm.WITHOUT_SENTIMENT, Arm.WITH_SENTIMENT)
    if noise_control:
        arms += (Arm.NOISE_CONTROL,)

    results: dict[tuple[str, Arm], CrossValidationResult] = {}
    task = progress_reporter.add_task("Ablation", len(models) * len(arms))
    for model in models:
        for arm in arms:
            results[model, arm] = cross_validate(
                dataset,
                comments,
                arm_settings(settings, model, arm),
                plan,
                seed,
                threads,
                scorer,
                external_scores,
            )
            progress_reporter.update(task)
        logger.debug("Ablated model", model=model)
    return AblationReport(tuple(models), arms, results)
