"""Stages that fit, apply and explain the prediction pipeline."""

import numpy as np
import pandas as pd
import structlog

from sentidrop.actions.common import (
    finish_stage,
    load_inputs,
    prepare_output_dir,
    require_input,
    StageResult,
    write_csv,
)
from sentidrop.artifacts import write_json
from sentidrop.config import PipelineConfig
from sentidrop.ensemble import flag_at_risk, Predictions, write_predictions
from sentidrop.explain import (
    background_sample,
    explain_rows,
    rank_importance,
    select_top_k,
    write_explanations,
    write_ranking,
)
from sentidrop.models import TrainedModel
from sentidrop.pipeline import (
    FittedPipeline,
    fit_pipeline,
    load_pipeline,
    rank_features,
    save_pipeline,
)
from sentidrop.utils.seeding import derive_seed, SELECTION

logger = structlog.get_logger(__name__)


def train_pipeline(config: PipelineConfig) -> StageResult:
    """Fits the pipeline on all labeled students of the run."""
    out_dir = prepare_output_dir(config)
    inputs = load_inputs(config)
    fitted = fit_pipeline(
        inputs.dataset,
        inputs.comments,
        config.settings,
        config.seed,
        config.threads,
        inputs.scorer,
        inputs.external_scores,
    )
    save_pipeline(fitted, out_dir / "pipeline.json")
    return finish_stage(config, "train", {"pipeline": "pipeline.json"}, fitted)


def _load_fitted(config: PipelineConfig) -> FittedPipeline:
    return load_pipeline(require_input(config, "paths.model"))


def predict_dropout(config: PipelineConfig) -> StageResult:
    """Predicts dropout probabilities and lists the students at risk.

    Labels are not required. At-risk rows carry the early negativity and
    low engagement markers used to prioritise interventions.
    """
    out_dir = prepare_output_dir(config)
    fitted = _load_fitted(config)
    inputs = load_inputs(config, fitted.settings.use_sentiment)
    threshold = fitted.settings.decision_threshold
    args = (inputs.dataset, inputs.comments, inputs.external_scores)

    if isinstance(fitted.model, TrainedModel):
        p = fitted.predict_proba(*args)
        predictions = Predictions(inputs.dataset.student_ids, np.empty((p.size, 0)), p)
        write_csv(
            out_dir / "predictions.csv",
            pd.DataFrame(
                {
                    "student_id": list(predictions.student_ids),
                    f"p_{fitted.settings.model}": p,
                    "predicted_label": predictions.labels(threshold),
                    "threshold": threshold,
                }
            ),
        )
    else:
        predictions = fitted.predictions(*args)
        write_predictions(out_dir / "predictions.csv", predictions, threshold)

    at_risk = flag_at_risk(
        predictions,
        fitted.merged_features(*args),
        threshold,
        config.engagement_column,
        fitted.settings.class_threshold,
    )
    write_csv(
        out_dir / "at_risk.csv",
        pd.DataFrame(
            {
                "student_id": [s.student_id for s in at_risk],
                "probability": [s.probability for s in at_risk],
                "early_negative": [int(s.early_negative) for s in at_risk],
                "low_engagement": [int(s.low_engagement) for s in at_risk],
            }
        ),
    )
    logger.info(
        "Predicted dropout", n_students=inputs.dataset.n, n_at_risk=len(at_risk)
    )
    artifacts = {"predictions": "predictions.csv", "at_risk": "at_risk.csv"}
    return finish_stage(config, "predict", artifacts, predictions)


def explain_predictions(config: PipelineConfig) -> StageResult:
    """SHAP values of the fitted model for (a stratified sample of) students.

    The background rows are drawn from the same students, stratified by
    label when the data is labeled.
    """
    out_dir = prepare_output_dir(config)
    settings = config.explain
    fitted = _load_fitted(config)
    inputs = load_inputs(config, fitted.settings.use_sentiment)
    dataset = inputs.dataset
    X = fitted.transform(dataset, inputs.comments, inputs.external_scores)
    labels = dataset.labels() if dataset.has_labels else None

    background = X.require_imputed()[
        background_sample(X.n_rows, labels, settings.background_size, config.seed)
    ]
    rows = np.arange(X.n_rows)
    if settings.rows is not None:
        rows = background_sample(
            X.n_rows, labels, settings.rows, derive_seed(config.seed, 1)
        )
    explanations = explain_rows(
        fitted.model,
        X.select_rows(rows),
        background,
        settings.mode,
        settings.n_permutations,
        config.seed,
        config.threads,
    )
    ranking = rank_importance(explanations)
    write_explanations(out_dir / "shap.csv", explanations)
    write_ranking(out_dir / "importance.csv", ranking)
    artifacts = {"shap": "shap.csv", "importance": "importance.csv"}
    return finish_stage(config, "explain", artifacts, ranking)


def select_features(config: PipelineConfig) -> StageResult:
    """Ranks model inputs by mean |SHAP| and keeps the top k.

    With sentiment enabled, a second ranking without the sentiment block is
    written for comparison.
    """
    out_dir = prepare_output_dir(config)
    settings = config.settings
    inputs = load_inputs(config)
    seed = derive_seed(config.seed, SELECTION)
    ranking = rank_features(
        inputs.dataset,
        inputs.comments,
        settings,
        seed,
        config.threads,
        inputs.scorer,
        inputs.external_scores,
    )
    write_ranking(out_dir / "feature_ranking.csv", ranking)
    artifacts = {"feature_ranking": "feature_ranking.csv"}

    if settings.use_sentiment:
        without = rank_features(
            inputs.dataset,
            settings=settings.evolve(use_sentiment=False),
            seed=seed,
            threads=config.threads,
        )
        write_ranking(out_dir / "feature_ranking_without_sentiment.csv", without)
        artifacts["feature_ranking_without_sentiment"] = (
            "feature_ranking_without_sentiment.csv"
        )

    k = min(settings.top_k or len(ranking), len(ranking))
    write_json(
        out_dir / "selected_features.json",
        {"top_k": k, "selected": list(select_top_k(ranking, k))},
    )
    artifacts["selected_features"] = "selected_features.json"
    return finish_stage(config, "select-features", artifacts, ranking)
