"""Stages that evaluate the pipeline on held-out students."""

import pandas as pd
import structlog

from sentidrop.actions.common import (
    finish_stage,
    fold_plan,
    load_inputs,
    prepare_output_dir,
    StageResult,
    write_csv,
)
from sentidrop.artifacts import write_json
from sentidrop.config import PipelineConfig
from sentidrop.evaluation import (
    ablation,
    Arm,
    cross_validate,
    CrossValidationResult,
    grid_search,
    MetricsReport,
)
from sentidrop.progress import ProgressReporter

logger = structlog.get_logger(__name__)


def reports_frame(reports: tuple[MetricsReport, ...]) -> pd.DataFrame:
    """One row per model and fold with every metric and the confusion cells."""
    return pd.DataFrame(
        [
            {"model": r.model, "fold": r.fold}
            | r.values
            | r.confusion.to_dict()
            | {"degenerate": ";".join(r.degenerate)}
            for r in reports
        ]
    )


def run_cross_validation(
    config: PipelineConfig, progress_reporter: ProgressReporter | None = None
) -> StageResult:
    out_dir = prepare_output_dir(config)
    inputs = load_inputs(config)
    plan = fold_plan(config, inputs.dataset)
    result: CrossValidationResult = cross_validate(
        inputs.dataset,
        inputs.comments,
        config.settings,
        plan,
        config.seed,
        config.threads,
        inputs.scorer,
        inputs.external_scores,
        progress_reporter,
    )
    write_json(
        out_dir / "metrics.json",
        result.to_dict() | {"strategy": config.cv.strategy, "k": plan.k},
    )
    write_csv(out_dir / "cv_folds.csv", reports_frame(result.reports))
    write_csv(out_dir / "oof_predictions.csv", result.out_of_fold_frame())
    artifacts = {
        "metrics": "metrics.json",
        "cv_folds": "cv_folds.csv",
        "oof_predictions": "oof_predictions.csv",
    }
    return finish_stage(config, "cv", artifacts, result)


def run_grid_search(
    config: PipelineConfig, progress_reporter: ProgressReporter | None = None
) -> StageResult:
    out_dir = prepare_output_dir(config)
    inputs = load_inputs(config)
    plan = fold_plan(config, inputs.dataset)
    result = grid_search(
        inputs.dataset,
        inputs.comments,
        config.settings,
        config.grid_family,
        config.grid,
        plan,
        config.seed,
        config.threads,
        inputs.scorer,
        inputs.external_scores,
        progress_reporter,
    )
    write_json(out_dir / "grid.json", result.to_dict())
    write_csv(out_dir / "grid.csv", result.table())
    return finish_stage(config, "grid", {"grid": "grid.json", "grid_table": "grid.csv"}, result)


def run_ablation(
    config: PipelineConfig, progress_reporter: ProgressReporter | None = None
) -> StageResult:
    """Cross-validates each configured model with and without sentiment.

    Sentiment inputs are needed even when sentiment is disabled for the
    other stages.
    """
    out_dir = prepare_output_dir(config)
    inputs = load_inputs(config, sentiment=True)
    plan = fold_plan(config, inputs.dataset)
    report = ablation(
        inputs.dataset,
        inputs.comments,
        config.settings,
        plan,
        config.ablation_models,
        config.seed,
        config.threads,
        config.noise_control,
        inputs.scorer,
        inputs.external_scores,
        progress_reporter,
    )
    write_json(out_dir / "ablation.json", report.to_dict())
    write_csv(out_dir / "ablation.csv", report.flat())
    write_csv(out_dir / "ablation_heatmap.csv", report.heatmap())

    deltas = [
        report.deltas(arm).rename(columns={str(arm): "value"}).assign(arm=str(arm))
        for arm in report.arms
        if arm is not Arm.WITHOUT_SENTIMENT
    ]
    write_csv(out_dir / "ablation_deltas.csv", pd.concat(deltas, ignore_index=True))
    artifacts = {
        "ablation": "ablation.json",
        "ablation_folds": "ablation.csv",
        "ablation_heatmap": "ablation_heatmap.csv",
        "ablation_deltas": "ablation_deltas.csv",
    }
    return finish_stage(config, "ablate", artifacts, report)
