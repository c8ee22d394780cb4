"""Consolidation of stage artifacts into plot-ready tables.

Each table is a long-format CSV whose header names its columns; nothing is
rendered.
"""

from dataclasses import replace
from pathlib import Path

import pandas as pd
import structlog

from sentidrop.actions.common import finish_stage, StageResult, write_csv
from sentidrop.artifacts import collect_artifacts, read_json
from sentidrop.config import PipelineConfig
from sentidrop.evaluation import METRIC_NAMES

logger = structlog.get_logger(__name__)


def correlation_table(path: Path) -> pd.DataFrame:
    """Upper triangle (with diagonal) of the correlation matrix."""
    wide = pd.read_csv(path)
    names = list(wide["feature"])
    rows = [
        {"feature_a": a, "feature_b": b, "correlation": float(wide.at[i, b])}
        for i, a in enumerate(names)
        for b in names[i:]
    ]
    return pd.DataFrame(rows, columns=["feature_a", "feature_b", "correlation"])


def confusion_table(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)[["model", "fold", "tp", "tn", "fp", "fn"]]


def boxplot_table(path: Path) -> pd.DataFrame:
    """One row per fold, metric and model."""
    folds = pd.read_csv(path)
    long = folds.melt(
        id_vars=["model", "fold"],
        value_vars=list(METRIC_NAMES),
        var_name="metric",
        value_name="value",
    )
    return long.sort_values(["model", "metric", "fold"], kind="stable").reset_index(
        drop=True
    )


def radar_table(path: Path) -> pd.DataFrame:
    """Mean and standard deviation of every metric per model."""
    aggregate = read_json(path)["aggregate"]
    rows = [
        {
            "model": model,
            "metric": metric,
            "mean": aggregate[model][metric]["mean"],
            "std": aggregate[model][metric]["std"],
        }
        for model in aggregate
        for metric in METRIC_NAMES
    ]
    return pd.DataFrame(rows, columns=["model", "metric", "mean", "std"])


def shap_comparison_table(with_path: Path, without_path: Path | None) -> pd.DataFrame:
    """Importance and rank of each feature with and without sentiment."""
    table = pd.read_csv(with_path).rename(
        columns={"rank": "rank_with_sentiment", "importance": "importance_with_sentiment"}
    )
    if without_path is not None:
        without = pd.read_csv(without_path).rename(
            columns={
                "rank": "rank_without_sentiment",
                "importance": "importance_without_sentiment",
            }
        )
        table = table.merge(without, on="feature", how="left")
    return table[["feature", *[c for c in table.columns if c != "feature"]]]


def text_terms_table(path: Path) -> pd.DataFrame:
    """Most frequent unigrams and bigrams overall and per gold class."""
    statistics = read_json(path)
    scopes = [("all", statistics)] + list(statistics["by_class"].items())
    rows = [
        {"scope": scope, "ngram": n, "term": term, "count": count}
        for scope, section in scopes
        for n, key in ((1, "unigrams"), (2, "bigrams"))
        for term, count in section[key]
    ]
    return pd.DataFrame(rows, columns=["scope", "ngram", "term", "count"])


def temporal_table(path: Path) -> pd.DataFrame:
    return pd.DataFrame(
        read_json(path)["groups"], columns=["group", "count", "dropouts", "rate"]
    )


def build_report(config: PipelineConfig, run_dir: Path | None = None) -> StageResult:
    """Writes one report table per analysis found in the run directory.

    Raises:
        MissingArtifactsError: If the run directory has no manifests.
    """
    run_dir = Path(run_dir or config.output_dir)
    found = collect_artifacts(run_dir)

    tables: dict[str, pd.DataFrame] = {}
    if "correlation" in found:
        tables["report_correlation"] = correlation_table(found["correlation"])
    if "cv_folds" in found:
        tables["report_confusion"] = confusion_table(found["cv_folds"])
        tables["report_boxplot"] = boxplot_table(found["cv_folds"])
    if "metrics" in found:
        tables["report_radar"] = radar_table(found["metrics"])
    if "ablation_heatmap" in found:
        tables["report_heatmap"] = pd.read_csv(found["ablation_heatmap"])
    if "feature_ranking" in found:
        tables["report_shap_comparison"] = shap_comparison_table(
            found["feature_ranking"], found.get("feature_ranking_without_sentiment")
        )
    if "corpus_statistics" in found:
        tables["report_text_terms"] = text_terms_table(found["corpus_statistics"])
    if "temporal_risk" in found:
        tables["report_temporal_risk"] = temporal_table(found["temporal_risk"])

    artifacts = {}
    for name, table in tables.items():
        write_csv(run_dir / f"{name}.csv", table)
        artifacts[name] = f"{name}.csv"
    if not tables:
        logger.warning("No reportable artifacts found", run_dir=str(run_dir))

    return finish_stage(replace(config, output_dir=run_dir), "report", artifacts, tables)
