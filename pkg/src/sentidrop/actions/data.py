"""Stages that generate and inspect input data."""

import numpy as np
import pandas as pd
import structlog

from sentidrop import synth
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
from sentidrop.core_data import (
    CommentSet,
    Dataset,
    load_comments,
    load_tabular,
    validate,
    write_tabular,
)
from sentidrop.preprocess import (
    correlation_matrix,
    flag_outliers,
    impute_mean,
    normalize,
    outlier_summary,
    OutlierTreatment,
)
from sentidrop.sentiment import corpus_statistics

logger = structlog.get_logger(__name__)


def generate_dataset(config: PipelineConfig) -> StageResult:
    """Writes a synthetic dataset, its comments and the ground truth.

    The ``synth`` section names a preset; its other keys override preset
    fields. The run seed always wins over a seed in the section.
    """
    out_dir = prepare_output_dir(config)
    options = dict(config.synth)
    name = options.pop("preset", "default")
    options["seed"] = config.seed
    synth_config = synth.preset(name, **options)

    dataset, comments, truth = synth.generate(synth_config)
    paths = synth.write_synthetic(out_dir, dataset, comments, truth)
    logger.info(
        "Generated synthetic data",
        preset=name,
        n_students=dataset.n,
        n_comments=len(comments),
    )
    artifacts = {
        "students": paths.tabular.name,
        "comments": paths.comments.name,
        "ground_truth": paths.ground_truth.name,
    }
    return finish_stage(config, "gen", artifacts, (dataset, comments, truth))


def correlation_frame(matrix: np.ndarray, names: tuple[str, ...]) -> pd.DataFrame:
    frame = pd.DataFrame(matrix, columns=list(names))
    frame.insert(0, "feature", list(names))
    return frame


def preprocess_dataset(config: PipelineConfig) -> StageResult:
    """Imputes, flags outliers and scales the tabular data of the run.

    Also writes the correlation matrix (with the label when present), a
    validation report of the data and comments, and text statistics of the
    comments when there are any.
    """
    out_dir = prepare_output_dir(config)
    settings = config.settings
    dataset = load_tabular(require_input(config, "paths.tabular"))
    comments_path = find_input(config, "paths.comments")
    comments = load_comments(comments_path) if comments_path else CommentSet()

    excluded = set(settings.exclude_columns)
    columns = tuple(c for c in dataset.feature_names if c not in excluded)
    imputed, imputation = impute_mean(dataset.matrix.select_columns(columns))
    flags = flag_outliers(imputed, settings.outlier_threshold)

    keep = np.arange(imputed.n_rows)
    if settings.outlier_treatment is OutlierTreatment.REMOVE:
        keep = np.flatnonzero(~flags.any(axis=1))
    scaled, scaler = normalize(imputed.select_rows(keep), settings.scaling)

    labels = [r.label for r in dataset.records]
    write_tabular(
        Dataset.from_matrix(scaled, [labels[i] for i in keep]),
        out_dir / "preprocessed.csv",
    )
    write_json(
        out_dir / "preprocess.json",
        {
            "imputation": imputation.to_dict(),
            "scaler": scaler.to_dict(),
            "outlier_threshold": settings.outlier_threshold,
            "outliers": outlier_summary(flags, imputed.column_names),
            "outlier_treatment": str(settings.outlier_treatment),
            "removed_rows": int(imputed.n_rows - keep.size),
        },
    )

    label = dataset.labels() if dataset.has_labels else None
    matrix, names = correlation_matrix(imputed, label)
    write_csv(out_dir / "correlation.csv", correlation_frame(matrix, names))

    report = validate(dataset, comments)
    for warning in report.warnings:
        logger.warning(warning)
    write_json(out_dir / "validation.json", report.to_dict())

    artifacts = {
        "preprocessed": "preprocessed.csv",
        "preprocess": "preprocess.json",
        "correlation": "correlation.csv",
        "validation": "validation.json",
    }
    if len(comments):
        write_json(
            out_dir / "corpus_statistics.json",
            corpus_statistics(comments, settings.scorer_config),
        )
        artifacts["corpus_statistics"] = "corpus_statistics.json"
    return finish_stage(config, "preprocess", artifacts, report)
