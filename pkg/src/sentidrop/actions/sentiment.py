"""Stages that train the scorer, score comments and analyse sentiment."""

import json

import pandas as pd
import structlog

from sentidrop.actions.common import (
    find_input,
    finish_stage,
    prepare_output_dir,
    require_input,
    StageResult,
    write_csv,
)
from sentidrop.artifacts import write_json
from sentidrop.config import PipelineConfig
from sentidrop.core_data import Dataset, load_comments, load_tabular
from sentidrop.pipeline import SentimentSource
from sentidrop.preprocess import impute_mean
from sentidrop.sentiment import (
    aggregate_monthly,
    first_last_differences,
    interaction_risk,
    load_external_scores,
    load_scorer,
    paired_ttest,
    save_scorer,
    score_comments,
    SentimentScore,
    sentiment_features_from_scores,
    temporal_risk,
    train_scorer,
)
from sentidrop.utils.dates import format_iso_datetime

logger = structlog.get_logger(__name__)


def train_sentiment_scorer(config: PipelineConfig) -> StageResult:
    """Trains the n-gram scorer on all gold-labeled comments."""
    out_dir = prepare_output_dir(config)
    settings = config.settings
    comments = load_comments(require_input(config, "paths.comments"))
    scorer = train_scorer(comments.labeled(), settings.scorer_config, config.seed)
    save_scorer(scorer, out_dir / "scorer.json")
    return finish_stage(config, "train-scorer", {"scorer": "scorer.json"}, scorer)


def _comment_scores(config: PipelineConfig) -> list[SentimentScore]:
    """Scores from the external file, or from the scorer of the run.

    Without a scorer file, the ``train`` source trains one on the gold
    labels; other sources require it.
    """
    settings = config.settings
    if settings.sentiment_source is SentimentSource.EXTERNAL:
        return load_external_scores(
            require_input(config, "paths.scores"), settings.class_threshold
        )

    comments = load_comments(require_input(config, "paths.comments"))
    if (scorer_path := find_input(config, "paths.scorer")) is not None:
        scorer = load_scorer(scorer_path)
    elif settings.sentiment_source is SentimentSource.TRAIN:
        scorer = train_scorer(comments.labeled(), settings.scorer_config, config.seed)
    else:
        scorer = load_scorer(require_input(config, "paths.scorer"))
    return score_comments(scorer, comments, settings.class_threshold)


def _labeled_dataset(config: PipelineConfig) -> Dataset | None:
    if (path := find_input(config, "paths.tabular")) is None:
        return None
    return load_tabular(path)


def score_sentiment(config: PipelineConfig) -> StageResult:
    """Scores comments and aggregates them per month and per student.

    With labeled tabular data at hand, the temporal and engagement
    interaction risk analyses are written as well.
    """
    out_dir = prepare_output_dir(config)
    settings = config.settings
    scores = _comment_scores(config)

    with open(out_dir / "scores.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for s in scores:
            record = {
                "student_id": s.student_id,
                "timestamp": format_iso_datetime(s.timestamp),
                "score": s.score,
                "class": str(s.sentiment_class),
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")

    monthly = aggregate_monthly(scores)
    write_csv(
        out_dir / "monthly_sentiment.csv",
        pd.DataFrame(
            {
                "student_id": [m.student_id for m in monthly],
                "month": [m.month for m in monthly],
                "mean_score": [m.mean_score for m in monthly],
                "comment_count": [m.comment_count for m in monthly],
            }
        ),
    )

    dataset = _labeled_dataset(config)
    student_ids = dataset.student_ids if dataset is not None else None
    features = sentiment_features_from_scores(
        scores, settings.term_start, student_ids, settings.include_shift
    )
    frame = pd.DataFrame(features.values, columns=list(features.column_names))
    frame.insert(0, "student_id", list(features.row_ids))
    write_csv(out_dir / "sentiment_features.csv", frame)

    artifacts = {
        "scores": "scores.jsonl",
        "monthly_sentiment": "monthly_sentiment.csv",
        "sentiment_features": "sentiment_features.csv",
    }
    if dataset is not None and dataset.has_labels:
        labels = dataset.labels()
        temporal = temporal_risk(features, labels, settings.class_threshold)
        write_json(out_dir / "temporal_risk.json", temporal.to_dict())
        artifacts["temporal_risk"] = "temporal_risk.json"

        column = config.engagement_column
        if column in dataset.feature_names:
            engagement, _ = impute_mean(dataset.matrix.select_columns([column]))
            interaction = interaction_risk(
                features, engagement.column(column), labels, settings.class_threshold
            )
            write_csv(out_dir / "interaction_risk.csv", pd.DataFrame(interaction.to_rows()))
            artifacts["interaction_risk"] = "interaction_risk.csv"
        else:
            logger.warning("Engagement column not found", column=column)

    return finish_stage(config, "score", artifacts, features)


def run_sentiment_ttest(config: PipelineConfig) -> StageResult:
    """Paired t-test of first-month against last-month mean sentiment.

    Pairs come from students who commented in the first month and later.
    """
    out_dir = prepare_output_dir(config)
    settings = config.settings
    features = sentiment_features_from_scores(
        _comment_scores(config), settings.term_start, include_shift=False
    )
    differences = first_last_differences(features)
    result = paired_ttest(differences)
    write_json(
        out_dir / "ttest.json",
        result.to_dict() | {"pairing": "first_month_minus_last_month"},
    )
    logger.info(
        "Tested sentiment shift",
        t=result.t_statistic,
        p=result.p_value_two_sided,
        n=result.n,
    )
    return finish_stage(config, "ttest", {"ttest": "ttest.json"}, result)
