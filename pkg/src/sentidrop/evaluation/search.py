"""Leakage-safe cross-validation and exhaustive hyper-parameter search."""

import itertools
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
import structlog
from joblib import delayed, Parallel

from sentidrop.core_data import CommentSet, Dataset
from sentidrop.ensemble import (
    ENSEMBLE_FAMILIES,
    EnsembleModel,
    FusionMode,
    OutputFusionModel,
)
from sentidrop.errors import ConfigError, EmptyGridError
from sentidrop.evaluation.folds import FoldPlan
from sentidrop.evaluation.metrics import (
    aggregate_reports,
    evaluate,
    METRIC_NAMES,
    MetricsReport,
)
from sentidrop.models import params_for
from sentidrop.pipeline import ENSEMBLE, fit_pipeline, PipelineSettings
from sentidrop.progress import NullProgressReporter, ProgressReporter
from sentidrop.sentiment import SentimentScore, SentimentScorer
from sentidrop.types import HyperParameters, ModelFamily, StudentId
from sentidrop.utils.seeding import derive_seed, FOLDS

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    test_index: np.ndarray
    #: Held-out probabilities per model tag.
    probabilities: dict[str, np.ndarray]
    n_train: int


@dataclass(frozen=True, eq=False)
class CrossValidationResult:
    reports: tuple[MetricsReport, ...]
    student_ids: tuple[StudentId, ...]
    labels: np.ndarray
    #: Held-out fold of every student, -1 if never evaluated.
    folds: np.ndarray
    #: Out-of-fold probabilities per model tag, NaN if never evaluated.
    out_of_fold: dict[str, np.ndarray]

    @property
    def aggregate(self) -> dict[str, dict[str, dict[str, float]]]:
        return aggregate_reports(self.reports)

    @property
    def models(self) -> tuple[str, ...]:
        return tuple(self.out_of_fold)

    def mean(self, metric: str, model: str | None = None) -> float:
        model = model or self.models[-1]
        return self.aggregate[model][metric]["mean"]

    def reports_for(self, model: str) -> tuple[MetricsReport, ...]:
        return tuple(r for r in self.reports if r.model == model)

    def out_of_fold_frame(self) -> pd.DataFrame:
        evaluated = self.folds >= 0
        frame = pd.DataFrame(
            {
                "student_id": np.asarray(self.student_ids, dtype=object)[evaluated],
                "fold": self.folds[evaluated],
                "label": self.labels[evaluated],
            }
        )
        for model, values in self.out_of_fold.items():
            frame[f"p_{model}"] = values[evaluated]
        return frame

    def to_dict(self) -> dict[str, Any]:
        return {
            "folds": [r.to_dict() for r in self.reports],
            "aggregate": self.aggregate,
        }


def _run_fold(
    dataset: Dataset,
    comments: CommentSet | None,
    settings: PipelineSettings,
    plan: FoldPlan,
    fold: int,
    seed: int,
    scorer: SentimentScorer | None,
    external_scores: list[SentimentScore] | None,
) -> FoldOutcome:
    train_index, test_index = plan.train_test(dataset.student_ids, fold)
    train = dataset.subset(dataset.student_ids[i] for i in train_index)
    test = dataset.subset(dataset.student_ids[i] for i in test_index)

    fitted = fit_pipeline(
        train,
        comments,
        settings,
        derive_seed(seed, FOLDS, fold),
        threads=1,
        scorer=scorer,
        external_scores=external_scores,
    )
    X_test = fitted.transform(test, comments, external_scores)
    if isinstance(fitted.model, (EnsembleModel, OutputFusionModel)):
        members = fitted.model.member_probabilities(X_test)
        probabilities = {str(f): members[:, j] for j, f in enumerate(ENSEMBLE_FAMILIES)}
        probabilities[ENSEMBLE] = fitted.model.predict_proba(X_test)
    else:
        probabilities = {settings.model: fitted.model.predict_proba(X_test)}
    logger.debug("Fold fitted", fold=fold, n_train=train.n, n_test=test.n)
    return FoldOutcome(fold, test_index, probabilities, train.n)


def cross_validate(
    dataset: Dataset,
    comments: CommentSet | None,
    settings: PipelineSettings,
    plan: FoldPlan,
    seed: int = 0,
    threads: int = 1,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
    progress_reporter: ProgressReporter | None = None,
) -> CrossValidationResult:
    """Evaluates the pipeline on every held-out fold of ``plan``.

    Each fold fits the whole pipeline (imputation, scaling, sentiment
    scorer, selection and models) on its training students only, with a
    seed derived from ``seed`` and the fold index. For ensembles, the three
    members are reported next to the ensemble.

    Args:
        dataset: Labeled students.
        comments: Comments of any students; each fold uses its own.
        settings: Pipeline options.
        plan: A fold plan.
        seed: Root seed.
        threads: Folds evaluated in parallel.
        scorer: Pre-trained scorer, for the ``scorer`` sentiment source.
        external_scores: Scores, for the ``external`` sentiment source.
        progress_reporter: Advanced once per finished fold.

    Returns:
        Per-fold reports (in fold order) and out-of-fold probabilities.
    """
    if progress_reporter is None:
        progress_reporter = NullProgressReporter()

    labels = dataset.labels()
    folds = plan.evaluated_folds
    task = progress_reporter.add_task("Folds", len(folds))
    tasks = (
        delayed(_run_fold)(
            dataset, comments, settings, plan, fold, seed, scorer, external_scores
        )
        for fold in folds
    )

    outcomes: dict[int, FoldOutcome] = {}
    for outcome in Parallel(n_jobs=threads, return_as="generator")(tasks):
        outcomes[outcome.fold] = outcome
        progress_reporter.update(task)

    n = dataset.n
    fold_of_row = np.full(n, -1)
    out_of_fold: dict[str, np.ndarray] = {}
    reports: list[MetricsReport] = []
    for fold in folds:
        outcome = outcomes[fold]
        fold_of_row[outcome.test_index] = fold
        y = labels[outcome.test_index]
        for model, p in outcome.probabilities.items():
            out_of_fold.setdefault(model, np.full(n, np.nan))[outcome.test_index] = p
            reports.append(evaluate(y, p, settings.decision_threshold, model, fold))

    return CrossValidationResult(
        tuple(reports), dataset.student_ids, labels, fold_of_row, out_of_fold
    )


def _canonical(config: Mapping[str, Any]) -> str:
    return json.dumps(config, sort_keys=True)


def expand_grid(grid: Mapping[str, Sequence[Any]]) -> list[HyperParameters]:
    """Cartesian product of a hyper-parameter grid, keys in sorted order.

    Raises:
        EmptyGridError: If the grid has no points.
    """
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise EmptyGridError()
    keys = sorted(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


@dataclass(frozen=True, eq=False)
class GridSearchResult:
    family: str
    #: Evaluated configurations, in grid order.
    configs: tuple[HyperParameters, ...]
    results: tuple[CrossValidationResult, ...]
    best_index: int

    @property
    def best_config(self) -> HyperParameters:
        return self.configs[self.best_index]

    @property
    def best_result(self) -> CrossValidationResult:
        return self.results[self.best_index]

    def table(self) -> pd.DataFrame:
        """One row per configuration with mean and std of every metric."""
        rows = []
        for config, result in zip(self.configs, self.results):
            summary = result.aggregate[self.family]
            row: dict[str, Any] = {"config": _canonical(config)}
            for name in METRIC_NAMES:
                row[f"{name}_mean"] = summary[name]["mean"]
                row[f"{name}_std"] = summary[name]["std"]
            rows.append(row)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "best_config": self.best_config,
            "table": [
                {"config": config, "aggregate": result.aggregate[self.family]}
                for config, result in zip(self.configs, self.results)
            ],
        }


def select_best(
    configs: Sequence[HyperParameters], results: Sequence[CrossValidationResult], model: str
) -> int:
    """Index of the highest mean accuracy; ties by AUC, then smallest config."""
    keys = [
        (-r.mean("accuracy", model), -r.mean("auc", model), _canonical(c))
        for c, r in zip(configs, results)
    ]
    return min(range(len(keys)), key=keys.__getitem__)


def grid_search(
    dataset: Dataset,
    comments: CommentSet | None,
    settings: PipelineSettings,
    family: ModelFamily | str,
    grid: Mapping[str, Sequence[Any]],
    plan: FoldPlan,
    seed: int = 0,
    threads: int = 1,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
    progress_reporter: ProgressReporter | None = None,
) -> GridSearchResult:
    """Cross-validates every point of ``grid`` for one model family.

    All points share the fold plan and seed. Selection maximizes mean
    held-out accuracy, then mean AUC, then picks the lexicographically
    smallest canonical JSON of the configuration.

    Raises:
        EmptyGridError: If the grid has no points.
        ConfigError: If a grid key is not a hyper-parameter of the family.
    """
    if progress_reporter is None:
        progress_reporter = NullProgressReporter()

    family = str(ModelFamily(family))
    configs = expand_grid(grid)
    known = set(params_for(ModelFamily(family)).to_dict())
    if family == ModelFamily.LINEAR_SVM:
        known.add("C")
    for key in configs[0]:
        if key not in known:
            raise ConfigError("grid", f"'{key}' is not a {family} hyper-parameter")

    base = dict(settings.hyperparameters.get(family, {}))
    points = [
        settings.evolve(
            model=family,
            fusion=FusionMode.FEATURE,
            hyperparameters=settings.hyperparameters | {family: base | config},
        )
        for config in configs
    ]

    task = progress_reporter.add_task(f"Grid ({family})", len(points))
    results: list[CrossValidationResult] = []
    tasks = (
        delayed(cross_validate)(
            dataset, comments, point, plan, seed, 1, scorer, external_scores
        )
        for point in points
    )
    for result in Parallel(n_jobs=threads, return_as="generator")(tasks):
        results.append(result)
        progress_reporter.update(task)

    best = select_best(configs, results, family)
    logger.info("Grid search finished", family=family, points=len(configs), best=configs[best])
    return GridSearchResult(family, tuple(configs), tuple(results), best)
