"""Synthetic students, comments and dropout labels with a known mechanism.

A latent engagement score drives the behavioral columns, a latent affect
(correlated with engagement) drives which lexicon the comments are written
from, and the dropout label is drawn from a logistic model of both. The
ground truth is returned so tests can check what models recover.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Self

import numpy as np
import structlog
from scipy.optimize import brentq
from scipy.special import expit, softmax

from sentidrop.core_data import (
    Comment,
    CommentSet,
    Dataset,
    FeatureMatrix,
    write_comments,
    write_tabular,
)
from sentidrop.errors import BadConfigError
from sentidrop.types import SENTIMENT_CLASSES, SentimentClass
from sentidrop.utils.dates import DEFAULT_TERM_START
from sentidrop.utils.seeding import derive_rng, SYNTH_COMMENTS, SYNTH_TABLE

logger = structlog.get_logger(__name__)

#: Behavioral columns driven by engagement, in column order.
ENGAGEMENT_COLUMNS: tuple[str, ...] = (
    "weekly_minutes",
    "active_days",
    "progression_totale",
    "heures_derniers_1_ans",
)
AGE_COLUMN = "age"
YEAR_COLUMN = "cohort_year"

DEFAULT_WEIGHTS: dict[str, float] = {
    "weekly_minutes": 0.6,
    "active_days": 0.4,
    "progression_totale": 0.5,
    "heures_derniers_1_ans": 0.3,
    "sentiment": 0.6,
    "early_negative_boost": 1.0,
}

POSITIVE_PHRASES = (
    "really enjoyed the lectures",
    "the exercises were very helpful",
    "great support from the tutor",
    "I feel confident about the project",
    "loving the new module",
    "the feedback was excellent",
    "happy with my progress so far",
    "the course is well organised",
)
NEGATIVE_PHRASES = (
    "I am struggling to keep up",
    "the workload is overwhelming",
    "confused by the assignments",
    "I feel lost and unmotivated",
    "not getting any useful feedback",
    "thinking about quitting the course",
    "the platform keeps crashing",
    "very frustrated with the deadlines",
)
NEUTRAL_PHRASES = (
    "submitted the weekly assignment",
    "the session is scheduled for monday",
    "watched the recorded lecture",
    "updated my profile details",
    "the exam date was announced",
    "downloaded the course material",
    "joined the group meeting",
    "read the chapter for next week",
)
OPENINGS = ("This week", "Today", "About the course:", "Update:", "Module news:", "Quick note:")

# Scale of affect on the class logits (negative, neutral, positive).
_AFFECT_SCALE = 1.5


def _with_default_weights(weights: dict[str, float]) -> dict[str, float]:
    return DEFAULT_WEIGHTS | dict(weights)


@dataclass(frozen=True)
class SynthConfig:
    n_students: int = 5000
    dropout_base_rate: float = 0.25
    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    #: Correlation of latent affect with latent engagement.
    affect_correlation: float = 0.5
    #: Mean comments per student per month.
    comment_rate: float = 1.5
    term_months: int = 6
    term_start: date = DEFAULT_TERM_START
    #: Total feature columns; columns past the first five are noise.
    n_features: int = 49
    #: Fraction of noise and age cells left missing.
    missing_rate: float = 0.02
    #: Fraction of comments carrying their generating class as gold label.
    gold_fraction: float = 0.3
    #: Cohort years assigned round-robin; adds a year column when set.
    cohort_years: tuple[int, ...] = ()
    positive_phrases: tuple[str, ...] = POSITIVE_PHRASES
    negative_phrases: tuple[str, ...] = NEGATIVE_PHRASES
    neutral_phrases: tuple[str, ...] = NEUTRAL_PHRASES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", _with_default_weights(self.weights))
        for name in ("cohort_years", "positive_phrases", "negative_phrases", "neutral_phrases"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        """Checks option ranges.

        Raises:
            BadConfigError: If any option is out of range.
        """
        if self.n_students < 1:
            raise BadConfigError("n_students must be positive")
        if not 0.0 < self.dropout_base_rate < 1.0:
            raise BadConfigError("dropout_base_rate must be within (0, 1)")
        if not -1.0 <= self.affect_correlation <= 1.0:
            raise BadConfigError("affect_correlation must be within [-1, 1]")
        if self.comment_rate < 0:
            raise BadConfigError("comment_rate must not be negative")
        if self.term_months < 1:
            raise BadConfigError("term_months must be positive")
        if self.n_features < len(ENGAGEMENT_COLUMNS) + 1:
            raise BadConfigError("n_features must be at least 5")
        for name in ("missing_rate", "gold_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise BadConfigError(f"{name} must be within [0, 1]")
        unknown = set(self.weights) - set(DEFAULT_WEIGHTS)
        if unknown:
            raise BadConfigError(f"Unknown effect weights: {sorted(unknown)}")
        lexicons = (self.positive_phrases, self.negative_phrases, self.neutral_phrases)
        if not all(lexicons):
            raise BadConfigError("Lexicons must not be empty")
        if len(set().union(*lexicons)) != sum(len(set(x)) for x in lexicons):
            raise BadConfigError("Lexicons must be disjoint")

    @property
    def feature_names(self) -> tuple[str, ...]:
        noise = tuple(
            f"synth_f{i:02d}" for i in range(len(ENGAGEMENT_COLUMNS) + 2, self.n_features + 1)
        )
        year = (YEAR_COLUMN,) if self.cohort_years else ()
        return ENGAGEMENT_COLUMNS + (AGE_COLUMN,) + noise + year

    def evolve(self, **changes: Any) -> Self:
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        output = asdict(self)
        output["term_start"] = self.term_start.isoformat()
        for name in ("cohort_years", "positive_phrases", "negative_phrases", "neutral_phrases"):
            output[name] = list(output[name])
        return output

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        d = dict(d)
        if "term_start" in d:
            d["term_start"] = date.fromisoformat(str(d["term_start"]))
        try:
            return cls(**d)
        except TypeError as exc:
            raise BadConfigError(str(exc)) from None


_NO_EFFECTS = {name: 0.0 for name in DEFAULT_WEIGHTS}

PRESETS: dict[str, dict[str, Any]] = {
    "default": {},
    "null": {"weights": _NO_EFFECTS},
    "sentiment-independent": {
        "weights": {"sentiment": 0.0, "early_negative_boost": 0.0},
        "affect_correlation": 0.0,
    },
    "sentiment-driven": {
        "weights": {"sentiment": 1.5, "early_negative_boost": 2.0},
        "affect_correlation": 0.2,
    },
}


def preset(name: str, **overrides: Any) -> SynthConfig:
    """Builds a named configuration, with ``overrides`` on top.

    Raises:
        BadConfigError: If the preset is unknown.
    """
    try:
        base = PRESETS[name]
    except KeyError:
        raise BadConfigError(
            f"Unknown preset '{name}', choose from: {', '.join(PRESETS)}"
        ) from None
    weights = _with_default_weights(base.get("weights", {})) | overrides.pop("weights", {})
    return SynthConfig.from_dict(base | overrides | {"weights": weights})


@dataclass(frozen=True, eq=False)
class GroundTruth:
    student_ids: tuple[str, ...]
    engagement: np.ndarray
    affect: np.ndarray
    #: Whether the student's first-month comments lean negative.
    first_month_negative: np.ndarray
    dropout_probability: np.ndarray
    bias: float
    weights: dict[str, float]
    config: SynthConfig

    def to_dict(self) -> dict[str, Any]:
        return {
            "bias": self.bias,
            "weights": self.weights,
            "config": self.config.to_dict(),
            "students": [
                {
                    "student_id": student_id,
                    "engagement": float(e),
                    "affect": float(a),
                    "first_month_negative": bool(f),
                    "dropout_probability": float(p),
                }
                for student_id, e, a, f, p in zip(
                    self.student_ids,
                    self.engagement,
                    self.affect,
                    self.first_month_negative,
                    self.dropout_probability,
                )
            ],
        }


def _standardize(values: np.ndarray) -> np.ndarray:
    std = values.std()
    return (values - values.mean()) / std if std > 0 else np.zeros_like(values)


def _month_start(start: date, offset: int) -> tuple[int, int]:
    index = start.month - 1 + offset
    return start.year + index // 12, index % 12 + 1


def _student_comments(
    config: SynthConfig, index: int, student_id: str, affect: float
) -> tuple[list[Comment], bool]:
    rng = derive_rng(config.seed, SYNTH_COMMENTS, index)
    logits = _AFFECT_SCALE * np.array([-affect, 0.0, affect])
    probabilities = softmax(logits)
    lexicons = {
        SentimentClass.NEGATIVE: config.negative_phrases,
        SentimentClass.NEUTRAL: config.neutral_phrases,
        SentimentClass.POSITIVE: config.positive_phrases,
    }

    comments = []
    first_month_polarity = []
    for month in range(config.term_months):
        year, month_number = _month_start(config.term_start, month)
        for _ in range(rng.poisson(config.comment_rate)):
            sentiment_class = SENTIMENT_CLASSES[rng.choice(3, p=probabilities)]
            phrases = lexicons[sentiment_class]
            opening = OPENINGS[rng.integers(len(OPENINGS))]
            text = f"{opening} {phrases[rng.integers(len(phrases))]}"
            timestamp = datetime(
                year,
                month_number,
                int(rng.integers(1, 29)),
                int(rng.integers(0, 24)),
                int(rng.integers(0, 60)),
                tzinfo=timezone.utc,
            )
            gold = sentiment_class if rng.random() < config.gold_fraction else None
            comments.append(Comment(student_id, timestamp, text, gold))
            if month == 0:
                first_month_polarity.append(SENTIMENT_CLASSES.index(sentiment_class) - 1)

    early_negative = bool(first_month_polarity) and float(np.mean(first_month_polarity)) < 0
    return comments, early_negative


def _calibrate_bias(linear: np.ndarray, base_rate: float) -> float:
    def excess(bias: float) -> float:
        return float(expit(bias + linear).mean()) - base_rate

    return float(brentq(excess, -50.0, 50.0, xtol=1e-12))


def generate(config: SynthConfig | None = None) -> tuple[Dataset, CommentSet, GroundTruth]:
    """Generates students, comments and labels; deterministic by ``config.seed``.

    Returns:
        A labeled dataset, its comments and the ground truth.
    """
    config = config or SynthConfig()
    n = config.n_students
    rng = derive_rng(config.seed, SYNTH_TABLE)
    student_ids = tuple(f"S{i:05d}" for i in range(n))

    engagement = rng.standard_normal(n)
    rho = config.affect_correlation
    affect = rho * engagement + math.sqrt(1.0 - rho**2) * rng.standard_normal(n)

    def noisy(scale: float, noise: float, offset: float) -> np.ndarray:
        return offset + scale * engagement + noise * rng.standard_normal(n)

    columns: dict[str, np.ndarray] = {
        "weekly_minutes": np.maximum(0.0, noisy(45.0, 20.0, 120.0)),
        "active_days": np.clip(np.round(noisy(1.2, 1.0, 3.5)), 0, 7),
        "progression_totale": np.clip(noisy(18.0, 8.0, 50.0), 0, 100),
        "heures_derniers_1_ans": np.maximum(0.0, noisy(30.0, 10.0, 80.0)),
        AGE_COLUMN: np.round(18.0 + rng.gamma(2.0, 2.5, n)),
    }
    noise_names = config.feature_names[len(ENGAGEMENT_COLUMNS) + 1 :]
    if config.cohort_years:
        noise_names = noise_names[:-1]
    for name in noise_names:
        columns[name] = np.round(rng.standard_normal(n), 6)

    optional = [AGE_COLUMN, *noise_names]
    missing = np.zeros((n, len(config.feature_names)), dtype=bool)
    for name in optional:
        j = config.feature_names.index(name)
        missing[:, j] = rng.random(n) < config.missing_rate
    if config.cohort_years:
        years = np.array(config.cohort_years, dtype=np.float64)
        columns[YEAR_COLUMN] = years[np.arange(n) % years.size]

    comments: list[Comment] = []
    first_month_negative = np.zeros(n, dtype=bool)
    for i, student_id in enumerate(student_ids):
        student_comments, first_month_negative[i] = _student_comments(
            config, i, student_id, float(affect[i])
        )
        comments.extend(student_comments)

    weights = config.weights
    linear = (
        weights["early_negative_boost"] * first_month_negative
        - weights["sentiment"] * _standardize(affect)
    )
    for name in ENGAGEMENT_COLUMNS:
        linear = linear - weights[name] * _standardize(columns[name])
    bias = _calibrate_bias(linear, config.dropout_base_rate)
    probability = expit(bias + linear)
    labels = (rng.random(n) < probability).astype(int)

    values = np.column_stack([columns[name] for name in config.feature_names])
    fm = FeatureMatrix(values, missing, config.feature_names, student_ids)
    dataset = Dataset.from_matrix(fm, labels.tolist())
    truth = GroundTruth(
        student_ids,
        engagement,
        affect,
        first_month_negative,
        probability,
        bias,
        dict(weights),
        config,
    )
    logger.debug(
        "Generated synthetic data",
        n_students=n,
        n_comments=len(comments),
        dropout_rate=float(labels.mean()),
    )
    return dataset, CommentSet(comments), truth


def xor_dataset(n_students: int = 400, seed: int = 0) -> Dataset:
    """Two uniform features whose signs' XOR is the label.

    No single split separates the classes; depth-two trees do.
    """
    rng = derive_rng(seed, SYNTH_TABLE)
    values = rng.uniform(-1.0, 1.0, size=(n_students, 2))
    labels = ((values[:, 0] > 0) ^ (values[:, 1] > 0)).astype(int)
    fm = FeatureMatrix.from_array(
        values, ("x1", "x2"), tuple(f"S{i:05d}" for i in range(n_students))
    )
    return Dataset.from_matrix(fm, labels.tolist())


@dataclass(frozen=True)
class SyntheticPaths:
    tabular: Path
    comments: Path
    ground_truth: Path


def write_synthetic(
    out_dir: Path,
    dataset: Dataset,
    comments: CommentSet,
    truth: GroundTruth | None = None,
) -> SyntheticPaths:
    """Writes ``students.csv``, ``comments.jsonl`` and ``ground_truth.json``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = SyntheticPaths(
        out_dir / "students.csv", out_dir / "comments.jsonl", out_dir / "ground_truth.json"
    )
    write_tabular(dataset, paths.tabular)
    write_comments(comments, paths.comments)
    if truth is not None:
        with open(paths.ground_truth, "w", encoding="utf-8", newline="\n") as f:
            json.dump(truth.to_dict(), f, indent=2)
    return paths
