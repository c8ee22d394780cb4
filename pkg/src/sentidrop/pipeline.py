"""Leakage-safe fitting of the whole prediction pipeline.

Everything learned from data (imputation values, scaling, the sentiment
scorer, selected features and models) is fitted on training students only
and then re-applied unchanged to unseen students.
"""

import zlib
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from enum import auto, StrEnum
from pathlib import Path
from typing import Any, Self

import numpy as np
import structlog

from sentidrop.artifacts import read_json, write_json
from sentidrop.core_data import CommentSet, Dataset, FeatureMatrix
from sentidrop.ensemble import (
    DEFAULT_DECISION_THRESHOLD,
    EnsembleModel,
    FusionMode,
    merge_features,
    OutputFusionModel,
    Predictions,
    train_ensemble,
    train_output_fusion,
)
from sentidrop.errors import ConfigError, UnknownFormatVersionError
from sentidrop.explain import (
    background_sample,
    explain_rows,
    ImportanceRanking,
    rank_importance,
    select_top_k,
    ShapMode,
)
from sentidrop.models import (
    model_from_dict,
    model_to_dict,
    params_for,
    train_model,
    TrainedModel,
)
from sentidrop.preprocess import (
    DEFAULT_OUTLIER_THRESHOLD,
    flag_outliers,
    ImputationLog,
    impute_mean,
    normalize,
    outlier_summary,
    OutlierTreatment,
    ScalerParams,
    ScalingMethod,
)
from sentidrop.sentiment import (
    DEFAULT_CLASS_THRESHOLD,
    ScorerConfig,
    SENTIMENT_FEATURE_NAMES,
    SentimentScore,
    SentimentScorer,
    sentiment_features,
    sentiment_features_from_scores,
    SHIFT_FEATURE_NAME,
    train_scorer,
)
from sentidrop.types import HyperParameters, Labels, ModelFamily, Probabilities
from sentidrop.utils.dates import DEFAULT_TERM_START
from sentidrop.utils.seeding import derive_rng, derive_seed, NOISE, SELECTION

logger = structlog.get_logger(__name__)

PIPELINE_FORMAT_VERSION = 1

#: Model tag of the three-model averaging ensemble.
ENSEMBLE = "ensemble"


class SentimentSource(StrEnum):
    #: Train the n-gram scorer on gold-labeled comments of training students.
    TRAIN = auto()
    #: Use a pre-trained scorer.
    SCORER = auto()
    #: Use scores computed by an external model.
    EXTERNAL = auto()
    #: Replace the sentiment block with random noise (control arm).
    NOISE = auto()


@dataclass(frozen=True)
class PipelineSettings:
    """Options of one pipeline fit; everything except the data and seed."""

    #: 'ensemble' or a model family.
    model: str = ENSEMBLE
    scaling: ScalingMethod = ScalingMethod.ZSCORE
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD
    outlier_treatment: OutlierTreatment = OutlierTreatment.REPORT
    use_sentiment: bool = True
    sentiment_source: SentimentSource = SentimentSource.TRAIN
    scorer_config: ScorerConfig = field(default_factory=ScorerConfig)
    class_threshold: float = DEFAULT_CLASS_THRESHOLD
    term_start: date = DEFAULT_TERM_START
    include_shift: bool = False
    fusion: FusionMode = FusionMode.FEATURE
    #: Hyper-parameters per model family.
    hyperparameters: dict[str, HyperParameters] = field(default_factory=dict)
    #: Keep only the k most important features (by mean |SHAP|).
    top_k: int | None = None
    background_size: int = 100
    selection_rows: int = 200
    n_permutations: int = 20
    #: Columns never used as features, e.g. a year column.
    exclude_columns: tuple[str, ...] = ()
    decision_threshold: float = DEFAULT_DECISION_THRESHOLD

    def __post_init__(self):
        if self.model != ENSEMBLE:
            try:
                ModelFamily(self.model)
            except ValueError:
                raise ConfigError("model", f"unknown model '{self.model}'") from None
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError("top_k", "must be positive")
        if self.fusion is FusionMode.OUTPUT and self.model != ENSEMBLE:
            raise ConfigError("fusion", "output fusion requires the ensemble model")
        for family, values in self.hyperparameters.items():
            if family not in set(ModelFamily):
                raise ConfigError("model.hyperparameters", f"unknown model '{family}'")
            params_for(family, values)
        object.__setattr__(self, "exclude_columns", tuple(self.exclude_columns))

    @property
    def family_hyperparameters(self) -> dict[ModelFamily, HyperParameters]:
        return {ModelFamily(k): dict(v) for k, v in self.hyperparameters.items()}

    def evolve(self, **changes: Any) -> Self:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        output = asdict(self)
        output["scorer_config"] = self.scorer_config.to_dict()
        output["term_start"] = self.term_start.isoformat()
        output["exclude_columns"] = list(self.exclude_columns)
        for key in ("scaling", "outlier_treatment", "sentiment_source", "fusion"):
            output[key] = str(output[key])
        return output

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        d = dict(d)
        conversions = {
            "scaling": ScalingMethod,
            "outlier_treatment": OutlierTreatment,
            "sentiment_source": SentimentSource,
            "fusion": FusionMode,
            "scorer_config": ScorerConfig.from_dict,
            "term_start": date.fromisoformat,
            "exclude_columns": tuple,
        }
        for key, convert in conversions.items():
            if key in d:
                d[key] = convert(d[key])
        return cls(**d)


def _noise_block(
    student_ids: tuple[str, ...], names: tuple[str, ...], seed: int
) -> FeatureMatrix:
    values = np.empty((len(student_ids), len(names)))
    for i, student_id in enumerate(student_ids):
        key = zlib.crc32(student_id.encode("utf-8"))
        values[i] = derive_rng(seed, NOISE, key).standard_normal(len(names))
    return FeatureMatrix(values, np.zeros(values.shape, dtype=bool), names, student_ids)


PredictiveModel = EnsembleModel | OutputFusionModel | TrainedModel


@dataclass(frozen=True, eq=False)
class FittedPipeline:
    settings: PipelineSettings
    seed: int
    #: Tabular columns used, in dataset order.
    tabular_columns: tuple[str, ...]
    imputation: ImputationLog
    scaler: ScalerParams
    #: Final model input columns, in merged order.
    selected_columns: tuple[str, ...]
    model: PredictiveModel
    scorer: SentimentScorer | None = None
    ranking: ImportanceRanking | None = None
    outliers: dict[str, int] = field(default_factory=dict)

    @property
    def sentiment_columns(self) -> tuple[str, ...]:
        if not self.settings.use_sentiment:
            return ()
        return SENTIMENT_FEATURE_NAMES + (
            (SHIFT_FEATURE_NAME,) if self.settings.include_shift else ()
        )

    def merged_features(
        self,
        dataset: Dataset,
        comments: CommentSet | None = None,
        external_scores: list[SentimentScore] | None = None,
    ) -> FeatureMatrix:
        """Imputed tabular rows joined with sentiment rows, unscaled."""
        fm = dataset.matrix.select_columns(self.tabular_columns)
        imputed = self.imputation.apply(fm)
        if not self.settings.use_sentiment:
            return imputed
        sa = _sentiment_block(
            self.settings,
            self.seed,
            imputed.row_ids,
            comments,
            self.scorer,
            external_scores,
        )
        return merge_features(imputed, sa)

    def transform(
        self,
        dataset: Dataset,
        comments: CommentSet | None = None,
        external_scores: list[SentimentScore] | None = None,
    ) -> FeatureMatrix:
        """Applies fitted preprocessing to (unseen) students."""
        merged = self.merged_features(dataset, comments, external_scores)
        return self.scaler.apply(merged).select_columns(self.selected_columns)

    def predict_proba(
        self,
        dataset: Dataset,
        comments: CommentSet | None = None,
        external_scores: list[SentimentScore] | None = None,
    ) -> Probabilities:
        return self.model.predict_proba(self.transform(dataset, comments, external_scores))

    def predictions(
        self,
        dataset: Dataset,
        comments: CommentSet | None = None,
        external_scores: list[SentimentScore] | None = None,
    ) -> Predictions:
        """Per-member and ensemble predictions.

        Raises:
            ConfigError: If the pipeline model is a single family.
        """
        if isinstance(self.model, TrainedModel):
            raise ConfigError("model", "member predictions need the ensemble model")
        return Predictions.from_model(
            self.model, self.transform(dataset, comments, external_scores)
        )

    def to_dict(self) -> dict[str, Any]:
        if isinstance(self.model, OutputFusionModel):
            model = {"kind": "output_fusion"} | self.model.to_dict()
        elif isinstance(self.model, EnsembleModel):
            model = {"kind": ENSEMBLE} | self.model.to_dict()
        else:
            model = {"kind": "single", "model": model_to_dict(self.model)}
        return {
            "format_version": PIPELINE_FORMAT_VERSION,
            "settings": self.settings.to_dict(),
            "seed": self.seed,
            "tabular_columns": list(self.tabular_columns),
            "imputation": self.imputation.to_dict(),
            "scaler": self.scaler.to_dict(),
            "selected_columns": list(self.selected_columns),
            "model": model,
            "scorer": self.scorer.to_dict() if self.scorer else None,
            "ranking": [list(item) for item in self.ranking.items] if self.ranking else None,
            "outliers": self.outliers,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        if d.get("format_version") != PIPELINE_FORMAT_VERSION:
            raise UnknownFormatVersionError(
                f"Unsupported pipeline format version: {d.get('format_version')!r}"
            )
        model_dict = d["model"]
        match model_dict["kind"]:
            case "output_fusion":
                model = OutputFusionModel.from_dict(model_dict)
            case "ensemble":
                model = EnsembleModel.from_dict(model_dict)
            case _:
                model = model_from_dict(model_dict["model"])
        return cls(
            settings=PipelineSettings.from_dict(d["settings"]),
            seed=int(d["seed"]),
            tabular_columns=tuple(d["tabular_columns"]),
            imputation=ImputationLog.from_dict(d["imputation"]),
            scaler=ScalerParams.from_dict(d["scaler"]),
            selected_columns=tuple(d["selected_columns"]),
            model=model,
            scorer=SentimentScorer.from_dict(d["scorer"]) if d.get("scorer") else None,
            ranking=(
                ImportanceRanking(tuple((n, float(v)) for n, v in d["ranking"]))
                if d.get("ranking")
                else None
            ),
            outliers=d.get("outliers", {}),
        )


def _sentiment_block(
    settings: PipelineSettings,
    seed: int,
    student_ids: tuple[str, ...],
    comments: CommentSet | None,
    scorer: SentimentScorer | None,
    external_scores: list[SentimentScore] | None,
) -> FeatureMatrix:
    names = SENTIMENT_FEATURE_NAMES + (
        (SHIFT_FEATURE_NAME,) if settings.include_shift else ()
    )
    match settings.sentiment_source:
        case SentimentSource.NOISE:
            return _noise_block(student_ids, names, seed)
        case SentimentSource.EXTERNAL:
            if external_scores is None:
                raise ConfigError("sentiment.scores", "external scores are required")
            wanted = set(student_ids)
            return sentiment_features_from_scores(
                [s for s in external_scores if s.student_id in wanted],
                settings.term_start,
                student_ids,
                settings.include_shift,
            )
        case _:
            if comments is None:
                raise ConfigError("paths.comments", "comments are required for sentiment")
            return sentiment_features(
                comments,
                scorer,
                settings.term_start,
                student_ids,
                settings.include_shift,
                settings.class_threshold,
            )


def _train_predictive_model(
    settings: PipelineSettings,
    X: FeatureMatrix,
    y: Labels,
    seed: int,
    threads: int,
) -> PredictiveModel:
    hyperparameters = settings.family_hyperparameters
    if settings.model != ENSEMBLE:
        family = ModelFamily(settings.model)
        return train_model(family, X, y, hyperparameters.get(family), seed, threads)

    known = set(SENTIMENT_FEATURE_NAMES) | {SHIFT_FEATURE_NAME}
    sentiment_columns = [c for c in X.column_names if c in known]
    if settings.fusion is FusionMode.OUTPUT and 0 < len(sentiment_columns) < X.n_columns:
        return train_output_fusion(X, y, sentiment_columns, hyperparameters, seed, threads)
    return train_ensemble(X, y, hyperparameters, seed, threads)


def select_features(
    X: FeatureMatrix,
    y: Labels,
    settings: PipelineSettings,
    seed: int,
    threads: int = 1,
) -> tuple[tuple[str, ...], ImportanceRanking]:
    """Ranks features by mean |SHAP| of an ensemble and keeps the top k.

    Returns:
        The selected names (in ``X`` column order) and the full ranking.
    """
    selection_seed = derive_seed(seed, SELECTION)
    ensemble = train_ensemble(X, y, settings.family_hyperparameters, selection_seed, threads)
    values = X.require_imputed()
    background = values[background_sample(X.n_rows, y, settings.background_size, selection_seed)]
    rows = background_sample(X.n_rows, y, settings.selection_rows, derive_seed(selection_seed, 1))
    explanations = explain_rows(
        ensemble,
        X.select_rows(rows),
        background,
        ShapMode.SAMPLING,
        settings.n_permutations,
        selection_seed,
        threads,
    )
    ranking = rank_importance(explanations)
    top = set(select_top_k(ranking, min(settings.top_k, len(ranking))))
    return tuple(c for c in X.column_names if c in top), ranking


@dataclass(frozen=True, eq=False)
class TrainingData:
    """Preprocessed training rows and the transforms fitted on them."""

    tabular_columns: tuple[str, ...]
    imputation: ImputationLog
    scaler: ScalerParams
    scorer: SentimentScorer | None
    outliers: dict[str, int]
    #: Scaled model input, outlier rows removed if configured.
    X: FeatureMatrix
    y: Labels


def prepare_training_data(
    dataset: Dataset,
    comments: CommentSet | None = None,
    settings: PipelineSettings | None = None,
    seed: int = 0,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
) -> TrainingData:
    """Imputes, flags outliers, builds sentiment rows, merges and scales.

    Raises:
        ConfigError: If the sentiment source lacks its input.
    """
    settings = settings or PipelineSettings()
    y = dataset.labels()
    excluded = set(settings.exclude_columns)
    tabular_columns = tuple(c for c in dataset.feature_names if c not in excluded)

    imputed, imputation = impute_mean(dataset.matrix.select_columns(tabular_columns))
    flags = flag_outliers(imputed, settings.outlier_threshold)
    outliers = outlier_summary(flags, imputed.column_names)

    if settings.use_sentiment and comments is not None:
        comments = comments.for_students(dataset.student_ids)
    if settings.use_sentiment and settings.sentiment_source is SentimentSource.TRAIN:
        if comments is None:
            raise ConfigError("paths.comments", "comments are required for sentiment")
        scorer = train_scorer(comments.labeled(), settings.scorer_config, seed)
    elif settings.use_sentiment and settings.sentiment_source is SentimentSource.SCORER:
        if scorer is None:
            raise ConfigError("paths.scorer", "a trained scorer is required")
    else:
        scorer = None

    merged = imputed
    if settings.use_sentiment:
        sa = _sentiment_block(
            settings, seed, imputed.row_ids, comments, scorer, external_scores
        )
        merged = merge_features(imputed, sa)

    keep = np.arange(merged.n_rows)
    if settings.outlier_treatment is OutlierTreatment.REMOVE:
        keep = np.flatnonzero(~flags.any(axis=1))
        logger.debug("Removed outlier rows", removed=merged.n_rows - keep.size)

    scaled, scaler = normalize(merged.select_rows(keep), settings.scaling)
    return TrainingData(
        tabular_columns, imputation, scaler, scorer, outliers, scaled, y[keep]
    )


def rank_features(
    dataset: Dataset,
    comments: CommentSet | None = None,
    settings: PipelineSettings | None = None,
    seed: int = 0,
    threads: int = 1,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
) -> ImportanceRanking:
    """Ranks every model input column by mean |SHAP| on training data."""
    settings = settings or PipelineSettings()
    data = prepare_training_data(
        dataset, comments, settings, seed, scorer, external_scores
    )
    _, ranking = select_features(
        data.X, data.y, settings.evolve(top_k=data.X.n_columns), seed, threads
    )
    return ranking


def fit_pipeline(
    dataset: Dataset,
    comments: CommentSet | None = None,
    settings: PipelineSettings | None = None,
    seed: int = 0,
    threads: int = 1,
    scorer: SentimentScorer | None = None,
    external_scores: list[SentimentScore] | None = None,
) -> FittedPipeline:
    """Fits preprocessing, sentiment features, selection and the model.

    Args:
        dataset: Labeled training students.
        comments: Comments; only those of training students are used.
        settings: Pipeline options.
        seed: Root seed.
        threads: Worker count.
        scorer: A pre-trained scorer for the ``scorer`` sentiment source.
        external_scores: Scores for the ``external`` sentiment source.
    """
    settings = settings or PipelineSettings()
    data = prepare_training_data(
        dataset, comments, settings, seed, scorer, external_scores
    )
    X = data.X

    selected, ranking = X.column_names, None
    if settings.top_k is not None:
        selected, ranking = select_features(X, data.y, settings, seed, threads)
        X = X.select_columns(selected)

    model = _train_predictive_model(settings, X, data.y, seed, threads)
    logger.debug(
        "Fitted pipeline",
        n_train=X.n_rows,
        n_features=len(selected),
        model=settings.model,
    )
    return FittedPipeline(
        settings=settings,
        seed=seed,
        tabular_columns=data.tabular_columns,
        imputation=data.imputation,
        scaler=data.scaler,
        selected_columns=tuple(selected),
        model=model,
        scorer=data.scorer,
        ranking=ranking,
        outliers=data.outliers,
    )


def save_pipeline(fitted: FittedPipeline, path: Path) -> None:
    write_json(path, fitted.to_dict())


def load_pipeline(path: Path, scorer: SentimentScorer | None = None) -> FittedPipeline:
    """Loads a fitted pipeline; ``scorer`` supplies a pre-trained scorer."""
    fitted = FittedPipeline.from_dict(read_json(path))
    if scorer is not None and fitted.scorer is None:
        fitted = replace(fitted, scorer=scorer)
    return fitted
