"""Group-aware cross-validation, metrics, grid search and ablation."""

from sentidrop.evaluation.ablation import (
    ABLATION_MODELS,
    ablation,
    AblationReport,
    Arm,
    arm_settings,
)
from sentidrop.evaluation.folds import DEFAULT_FOLDS, FoldPlan, group_kfold, year_holdout
from sentidrop.evaluation.metrics import (
    aggregate_reports,
    confusion,
    ConfusionMatrix,
    evaluate,
    METRIC_NAMES,
    metrics,
    MetricsReport,
    roc_auc,
)
from sentidrop.evaluation.search import (
    cross_validate,
    CrossValidationResult,
    expand_grid,
    grid_search,
    GridSearchResult,
    select_best,
)

__all__ = (
    "ABLATION_MODELS",
    "DEFAULT_FOLDS",
    "METRIC_NAMES",
    "AblationReport",
    "Arm",
    "ConfusionMatrix",
    "CrossValidationResult",
    "FoldPlan",
    "GridSearchResult",
    "MetricsReport",
    "ablation",
    "aggregate_reports",
    "arm_settings",
    "confusion",
    "cross_validate",
    "evaluate",
    "expand_grid",
    "grid_search",
    "group_kfold",
    "metrics",
    "roc_auc",
    "select_best",
    "year_holdout",
)
