"""Comment sentiment: scoring, monthly aggregation, paired t-test and features.

The reference scorer is a multinomial logistic regression over unigram and
bigram counts. Anything that maps texts to class probabilities in the order
(negative, neutral, positive) can stand in for it, see :class:`TextScorer`.
Scores may also come from an external model as a JSON Lines file.
"""

import json
import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from datetime import date, datetime
from functools import cached_property
from pathlib import Path
from typing import Any, Protocol, Self

import numpy as np
import structlog
from scipy.special import betainc, softmax
from sklearn.feature_extraction.text import CountVectorizer, ENGLISH_STOP_WORDS
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split

from sentidrop.core_data import Comment, CommentSet, FeatureMatrix
from sentidrop.errors import (
    BadTimestampError,
    DegenerateSampleError,
    MalformedJsonError,
    MissingClassError,
    ScoreRangeError,
    SentimentError,
    UnknownFormatVersionError,
    ZeroVarianceError,
)
from sentidrop.types import (
    FloatMatrix,
    Labels,
    MonthKey,
    SENTIMENT_CLASSES,
    SentimentClass,
    StudentId,
)
from sentidrop.utils.dates import month_key, months_between, parse_iso_datetime
from sentidrop.utils.seeding import derive_seed, SPLIT

logger = structlog.get_logger(__name__)

SCORER_FORMAT_VERSION = 1

DEFAULT_CLASS_THRESHOLD = 0.2

#: Negations carry polarity, so they are kept.
NEGATION_WORDS = frozenset({"no", "nor", "not", "never", "cannot", "none", "nothing"})
DEFAULT_STOP_WORDS: tuple[str, ...] = tuple(sorted(ENGLISH_STOP_WORDS - NEGATION_WORDS))

SENTIMENT_FEATURE_NAMES: tuple[str, ...] = (
    "sentiment_mean",
    "sentiment_first_month",
    "sentiment_last_month",
    "comment_count",
    "negative_fraction",
    "has_comments",
    "first_month_count",
)
SHIFT_FEATURE_NAME = "sentiment_shift"


def classify_score(
    score: float, threshold: float = DEFAULT_CLASS_THRESHOLD
) -> SentimentClass:
    """Maps a score in [-1, 1] to a class with symmetric thresholds."""
    if score >= threshold:
        return SentimentClass.POSITIVE
    if score <= -threshold:
        return SentimentClass.NEGATIVE
    return SentimentClass.NEUTRAL


@dataclass(frozen=True, slots=True)
class SentimentScore:
    student_id: StudentId
    timestamp: datetime
    #: Polarity in [-1, 1].
    score: float
    sentiment_class: SentimentClass


@dataclass(frozen=True, slots=True)
class MonthlySentiment:
    student_id: StudentId
    month: MonthKey
    mean_score: float
    comment_count: int


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value_two_sided: float
    mean_difference: float
    #: Sample standard deviation (n - 1 denominator).
    sample_stddev: float
    mu0: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class TextScorer(Protocol):
    """Maps texts to class probabilities ordered as ``SENTIMENT_CLASSES``."""

    def class_probabilities(self, texts: Sequence[str]) -> FloatMatrix: ...


@dataclass(frozen=True)
class ScorerConfig:
    """Text preprocessing and regularization settings of the scorer."""

    lowercase: bool = True
    stop_words: tuple[str, ...] = DEFAULT_STOP_WORDS
    ngram_range: tuple[int, int] = (1, 2)
    #: Inverse L2 regularization strength.
    c: float = 1.0
    max_iter: int = 1000
    holdout_fraction: float = 0.2
    threshold: float = DEFAULT_CLASS_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "stop_words", tuple(self.stop_words))
        object.__setattr__(self, "ngram_range", tuple(self.ngram_range))

    def make_vectorizer(self, **kwargs: Any) -> CountVectorizer:
        return CountVectorizer(
            lowercase=self.lowercase,
            stop_words=list(self.stop_words) or None,
            ngram_range=self.ngram_range,
            **kwargs,
        )

    def to_dict(self) -> dict[str, Any]:
        output = asdict(self)
        output["stop_words"] = list(self.stop_words)
        output["ngram_range"] = list(self.ngram_range)
        return output

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SentimentScorer:
    """A frozen n-gram scorer: vocabulary plus per-class linear weights."""

    #: N-grams ordered by column index.
    vocabulary: tuple[str, ...]
    #: Class-by-vocabulary weights, rows ordered as ``SENTIMENT_CLASSES``.
    coef: FloatMatrix
    intercept: np.ndarray
    config: ScorerConfig = field(default_factory=ScorerConfig)
    holdout_accuracy: float | None = None

    @cached_property
    def _vectorizer(self) -> CountVectorizer:
        return self.config.make_vectorizer(
            vocabulary={term: i for i, term in enumerate(self.vocabulary)}
        )

    def class_probabilities(self, texts: Sequence[str]) -> FloatMatrix:
        if not texts:
            return np.empty((0, len(SENTIMENT_CLASSES)))
        counts = self._vectorizer.transform(list(texts))
        logits = np.asarray(counts @ self.coef.T) + self.intercept
        return softmax(logits, axis=1)

    def score_texts(self, texts: Sequence[str]) -> np.ndarray:
        """Scores texts as p(positive) - p(negative). Blank texts score 0."""
        return score_texts(self, texts)

    def score_text(self, text: str) -> float:
        return float(self.score_texts([text])[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": SCORER_FORMAT_VERSION,
            "kind": "sentiment_scorer",
            "classes": [str(c) for c in SENTIMENT_CLASSES],
            "config": self.config.to_dict(),
            "holdout_accuracy": self.holdout_accuracy,
            "vocabulary": list(self.vocabulary),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        if d.get("format_version") != SCORER_FORMAT_VERSION:
            raise UnknownFormatVersionError(
                f"Unsupported scorer format version: {d.get('format_version')!r}"
            )
        return cls(
            vocabulary=tuple(d["vocabulary"]),
            coef=np.array(d["coef"], dtype=np.float64).reshape(
                len(SENTIMENT_CLASSES), len(d["vocabulary"])
            ),
            intercept=np.array(d["intercept"], dtype=np.float64),
            config=ScorerConfig.from_dict(d["config"]),
            holdout_accuracy=d.get("holdout_accuracy"),
        )


def score_texts(scorer: TextScorer, texts: Sequence[str]) -> np.ndarray:
    texts = list(texts)
    blank = np.array([not t.strip() for t in texts], dtype=bool)
    scores = np.zeros(len(texts))
    if (~blank).any():
        kept = [t for t, b in zip(texts, blank) if not b]
        probabilities = scorer.class_probabilities(kept)
        negative = SENTIMENT_CLASSES.index(SentimentClass.NEGATIVE)
        positive = SENTIMENT_CLASSES.index(SentimentClass.POSITIVE)
        scores[~blank] = probabilities[:, positive] - probabilities[:, negative]
    return np.clip(scores, -1.0, 1.0)


def _fit_scorer(
    texts: Sequence[str],
    labels: Labels,
    config: ScorerConfig,
    holdout_accuracy: float | None = None,
) -> SentimentScorer:
    vectorizer = config.make_vectorizer()
    try:
        counts = vectorizer.fit_transform(texts)
    except ValueError as exc:
        raise SentimentError(f"Cannot build vocabulary: {exc}") from None

    classifier = LogisticRegression(C=config.c, max_iter=config.max_iter)
    classifier.fit(counts, labels)

    # Align rows with the fixed class order.
    order = [list(classifier.classes_).index(i) for i in range(len(SENTIMENT_CLASSES))]
    vocabulary = sorted(vectorizer.vocabulary_.items(), key=lambda item: item[1])
    return SentimentScorer(
        vocabulary=tuple(term for term, _ in vocabulary),
        coef=np.ascontiguousarray(classifier.coef_[order], dtype=np.float64),
        intercept=np.ascontiguousarray(classifier.intercept_[order], dtype=np.float64),
        config=config,
        holdout_accuracy=holdout_accuracy,
    )


def train_scorer(
    labeled: Iterable[Comment], config: ScorerConfig | None = None, seed: int = 0
) -> SentimentScorer:
    """Trains the reference n-gram scorer on gold-labeled comments.

    Accuracy is first measured on a stratified holdout, then the scorer is
    refit on all examples. The holdout is skipped (accuracy ``None``) when a
    class has fewer than two examples or the corpus is too small to split.

    Raises:
        MissingClassError: If a class has no examples.
    """
    config = config or ScorerConfig()
    comments = [c for c in labeled if c.gold_label is not None]
    labels = np.array(
        [SENTIMENT_CLASSES.index(c.gold_label) for c in comments], dtype=int
    )
    counts = np.bincount(labels, minlength=len(SENTIMENT_CLASSES))
    for sentiment_class, count in zip(SENTIMENT_CLASSES, counts):
        if count == 0:
            raise MissingClassError(str(sentiment_class))

    texts = [c.text for c in comments]
    n = len(texts)
    n_test = math.ceil(config.holdout_fraction * n)

    holdout_accuracy = None
    if counts.min() >= 2 and n_test >= len(SENTIMENT_CLASSES) and n - n_test >= 2 * len(
        SENTIMENT_CLASSES
    ):
        train_index, test_index = train_test_split(
            np.arange(n),
            test_size=n_test,
            stratify=labels,
            random_state=derive_seed(seed, SPLIT) % 2**32,
        )
        partial = _fit_scorer([texts[i] for i in train_index], labels[train_index], config)
        probabilities = partial.class_probabilities([texts[i] for i in test_index])
        holdout_accuracy = float(
            (probabilities.argmax(axis=1) == labels[test_index]).mean()
        )

    scorer = _fit_scorer(texts, labels, config, holdout_accuracy)
    logger.info(
        "Trained sentiment scorer",
        n_examples=n,
        vocabulary=len(scorer.vocabulary),
        holdout_accuracy=holdout_accuracy,
    )
    return scorer


def score(
    scorer: TextScorer, comment: Comment, threshold: float = DEFAULT_CLASS_THRESHOLD
) -> SentimentScore:
    value = float(score_texts(scorer, [comment.text])[0])
    return SentimentScore(
        comment.student_id, comment.timestamp, value, classify_score(value, threshold)
    )


def score_comments(
    scorer: TextScorer,
    comments: Iterable[Comment],
    threshold: float = DEFAULT_CLASS_THRESHOLD,
) -> list[SentimentScore]:
    """Scores comments in one batch, keeping their order."""
    comments = list(comments)
    values = score_texts(scorer, [c.text for c in comments])
    return [
        SentimentScore(c.student_id, c.timestamp, float(v), classify_score(float(v), threshold))
        for c, v in zip(comments, values)
    ]


def save_scorer(scorer: SentimentScorer, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scorer.to_dict(), f)


def load_scorer(path: Path) -> SentimentScorer:
    with open(path, encoding="utf-8") as f:
        return SentimentScorer.from_dict(json.load(f))


def load_external_scores(
    path: Path, threshold: float = DEFAULT_CLASS_THRESHOLD
) -> list[SentimentScore]:
    """Loads scores produced by an external model.

    Each line is an object with ``student_id``, ``timestamp`` and ``score``.

    Raises:
        ScoreRangeError: If a score is outside [-1, 1].
    """
    scores = []
    with open(path, encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                student_id, value = str(obj["student_id"]), float(obj["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedJsonError(line_number, str(exc)) from None
            try:
                timestamp = parse_iso_datetime(str(obj["timestamp"]))
            except (KeyError, ValueError):
                raise BadTimestampError(line_number) from None
            if not -1.0 <= value <= 1.0:
                raise ScoreRangeError(f"Score out of [-1, 1] at line {line_number}: {value}")
            scores.append(
                SentimentScore(student_id, timestamp, value, classify_score(value, threshold))
            )
    return sorted(scores, key=lambda s: (s.student_id, s.timestamp))


def aggregate_monthly(scores: Iterable[SentimentScore]) -> list[MonthlySentiment]:
    """Averages scores per student and calendar month (UTC).

    Months without comments are absent.
    """
    grouped: dict[tuple[StudentId, MonthKey], list[float]] = defaultdict(list)
    for s in scores:
        grouped[(s.student_id, month_key(s.timestamp))].append(s.score)
    return [
        MonthlySentiment(student_id, month, math.fsum(values) / len(values), len(values))
        for (student_id, month), values in sorted(grouped.items())
    ]


def t_two_sided_p_value(t: float, df: int) -> float:
    """Two-sided p-value of Student's t via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2, 0.5, df / (df + t * t)))


def paired_ttest(differences: Sequence[float], mu0: float = 0.0) -> TTestResult:
    """Tests whether the mean of paired differences deviates from ``mu0``.

    Raises:
        DegenerateSampleError: If there are fewer than two differences.
        ZeroVarianceError: If all differences are equal but their mean is not
            ``mu0``.
    """
    d = np.asarray(differences, dtype=np.float64)
    n = d.size
    if n < 2:
        raise DegenerateSampleError(f"Paired t-test needs at least 2 differences, got {n}")
    df = n - 1

    if np.all(d == d[0]):
        if d[0] != mu0:
            raise ZeroVarianceError(
                f"All differences equal {d[0]}, which differs from mu0={mu0}"
            )
        return TTestResult(0.0, df, 1.0, float(d[0]), 0.0, mu0, n)

    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    t = (mean - mu0) / (sd / math.sqrt(n))
    return TTestResult(t, df, t_two_sided_p_value(t, df), mean, sd, mu0, n)


def sentiment_features_from_scores(
    scores: Iterable[SentimentScore],
    term_start: date,
    student_ids: Sequence[StudentId] | None = None,
    include_shift: bool = False,
) -> FeatureMatrix:
    """Builds one sentiment feature row per student.

    First-month values refer to the calendar month of ``term_start``; the
    last month is the latest month with comments. Students without
    comments get neutral zeros and ``has_comments = 0``.
    """
    by_student: dict[StudentId, list[SentimentScore]] = defaultdict(list)
    for s in scores:
        by_student[s.student_id].append(s)
    if student_ids is None:
        student_ids = sorted(by_student)

    names = SENTIMENT_FEATURE_NAMES + ((SHIFT_FEATURE_NAME,) if include_shift else ())
    values = np.zeros((len(student_ids), len(names)))
    for i, student_id in enumerate(student_ids):
        student_scores = by_student.get(student_id)
        if not student_scores:
            continue
        monthly: dict[int, list[float]] = defaultdict(list)
        for s in student_scores:
            monthly[months_between(term_start, s.timestamp)].append(s.score)
        first = monthly.get(0, [])
        last = monthly[max(monthly)]
        all_scores = [s.score for s in student_scores]
        n_negative = sum(s.sentiment_class is SentimentClass.NEGATIVE for s in student_scores)

        row = [
            math.fsum(all_scores) / len(all_scores),
            math.fsum(first) / len(first) if first else 0.0,
            math.fsum(last) / len(last),
            len(all_scores),
            n_negative / len(all_scores),
            1.0,
            len(first),
        ]
        if include_shift:
            row.append(row[1] - row[2] if first else 0.0)
        values[i] = row

    return FeatureMatrix(
        values, np.zeros(values.shape, dtype=bool), names, tuple(student_ids)
    )


def sentiment_features(
    comments: CommentSet,
    scorer: TextScorer,
    term_start: date,
    student_ids: Sequence[StudentId] | None = None,
    include_shift: bool = False,
    threshold: float = DEFAULT_CLASS_THRESHOLD,
) -> FeatureMatrix:
    """Scores comments and builds per-student sentiment feature rows."""
    if student_ids is None:
        student_ids = comments.student_ids
    else:
        comments = comments.for_students(student_ids)
    scores = score_comments(scorer, comments, threshold)
    return sentiment_features_from_scores(scores, term_start, student_ids, include_shift)


def neutral_features(
    student_ids: Sequence[StudentId], include_shift: bool = False
) -> FeatureMatrix:
    """Default rows for students without comments."""
    return sentiment_features_from_scores([], date(1970, 1, 1), student_ids, include_shift)


def first_last_differences(features: FeatureMatrix) -> np.ndarray:
    """Per-student first-month minus last-month mean.

    Only students who commented in the first month and in a later month
    contribute a pair.
    """
    first_count = features.column("first_month_count")
    total = features.column("comment_count")
    paired = (first_count > 0) & (total > first_count)
    first = features.column("sentiment_first_month")
    last = features.column("sentiment_last_month")
    return (first - last)[paired]


@dataclass(frozen=True)
class RiskGroup:
    name: str
    count: int
    dropouts: int

    @property
    def rate(self) -> float | None:
        """Dropout rate, or None for an empty group."""
        return self.dropouts / self.count if self.count else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "group": self.name,
            "count": self.count,
            "dropouts": self.dropouts,
            "rate": self.rate,
        }


@dataclass(frozen=True)
class TemporalReport:
    early_negative: RiskGroup
    late_negative: RiskGroup
    never_negative: RiskGroup

    @property
    def groups(self) -> tuple[RiskGroup, ...]:
        return (self.early_negative, self.late_negative, self.never_negative)

    @property
    def rates(self) -> tuple[float | None, ...]:
        return tuple(g.rate for g in self.groups)

    def to_dict(self) -> dict[str, Any]:
        return {"groups": [g.to_dict() for g in self.groups]}


def _risk_group(name: str, members: np.ndarray, labels: Labels) -> RiskGroup:
    return RiskGroup(name, int(members.sum()), int(labels[members].sum()))


def temporal_risk(
    features: FeatureMatrix,
    labels: Labels,
    threshold: float = DEFAULT_CLASS_THRESHOLD,
) -> TemporalReport:
    """Compares dropout rates of early-negative, later-negative and
    never-negative students.

    A student is early-negative when their first-month mean classifies as
    negative, late-negative when not early but any comment is negative.
    """
    labels = np.asarray(labels, dtype=int)
    early = (features.column("first_month_count") > 0) & (
        features.column("sentiment_first_month") <= -threshold
    )
    late = ~early & (features.column("negative_fraction") > 0)
    never = ~early & ~late
    return TemporalReport(
        _risk_group("early_negative", early, labels),
        _risk_group("late_negative", late, labels),
        _risk_group("never_negative", never, labels),
    )


ENGAGEMENT_TERCILES = ("low", "mid", "high")


@dataclass(frozen=True)
class InteractionReport:
    """Dropout rates per engagement tercile and overall sentiment class."""

    cells: tuple[tuple[str, SentimentClass, RiskGroup], ...]

    def rate(self, tercile: str, sentiment_class: SentimentClass) -> float | None:
        for t, c, group in self.cells:
            if t == tercile and c == sentiment_class:
                return group.rate
        raise KeyError((tercile, sentiment_class))

    def to_rows(self) -> list[dict[str, Any]]:
        return [
            {"engagement": t, "sentiment": str(c)} | group.to_dict()
            for t, c, group in self.cells
        ]


def interaction_risk(
    features: FeatureMatrix,
    engagement: np.ndarray,
    labels: Labels,
    threshold: float = DEFAULT_CLASS_THRESHOLD,
) -> InteractionReport:
    engagement = np.asarray(engagement, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    edges = np.quantile(engagement, [1 / 3, 2 / 3]) if engagement.size else [0.0, 0.0]
    tercile = np.digitize(engagement, edges, right=True)
    classes = np.array(
        [classify_score(v, threshold) for v in features.column("sentiment_mean")]
    )

    cells = []
    for t, tercile_name in enumerate(ENGAGEMENT_TERCILES):
        for sentiment_class in SENTIMENT_CLASSES:
            members = (tercile == t) & (classes == sentiment_class)
            cells.append(
                (tercile_name, sentiment_class, _risk_group(tercile_name, members, labels))
            )
    return InteractionReport(tuple(cells))


def _top_terms(
    texts: Sequence[str], config: ScorerConfig, n: int, top_n: int
) -> list[tuple[str, int]]:
    if not texts:
        return []
    vectorizer = CountVectorizer(
        lowercase=config.lowercase,
        stop_words=list(config.stop_words) or None,
        ngram_range=(n, n),
    )
    try:
        counts = vectorizer.fit_transform(texts)
    except ValueError:
        return []
    totals = np.asarray(counts.sum(axis=0)).ravel()
    terms = vectorizer.get_feature_names_out()
    ranked = sorted(zip(terms, totals), key=lambda item: (-item[1], item[0]))
    return [(str(term), int(total)) for term, total in ranked[:top_n]]


def corpus_statistics(
    comments: CommentSet, config: ScorerConfig | None = None, top_n: int = 20
) -> dict[str, Any]:
    """Summarizes comment lengths and the most frequent n-grams.

    Frequencies are counted after tokenization and stopword removal, overall
    and per gold class.
    """
    config = config or ScorerConfig()
    texts = [c.text for c in comments]
    analyzer = CountVectorizer(lowercase=config.lowercase).build_analyzer()
    token_counts = np.array([len(analyzer(t)) for t in texts], dtype=float)
    char_counts = np.array([len(t) for t in texts], dtype=float)

    def describe(values: np.ndarray) -> dict[str, float]:
        if not values.size:
            return {"mean": 0.0, "median": 0.0, "max": 0.0}
        return {
            "mean": float(values.mean()),
            "median": float(np.median(values)),
            "max": float(values.max()),
        }

    by_class: dict[str, Any] = {}
    gold_counts = Counter(str(c.gold_label) for c in comments if c.gold_label)
    for sentiment_class in SENTIMENT_CLASSES:
        class_texts = [c.text for c in comments if c.gold_label == sentiment_class]
        by_class[str(sentiment_class)] = {
            "count": gold_counts.get(str(sentiment_class), 0),
            "unigrams": _top_terms(class_texts, config, 1, top_n),
            "bigrams": _top_terms(class_texts, config, 2, top_n),
        }

    return {
        "n_comments": len(texts),
        "n_students": len(comments.student_ids),
        "tokens": describe(token_counts),
        "characters": describe(char_counts),
        "unigrams": _top_terms(texts, config, 1, top_n),
        "bigrams": _top_terms(texts, config, 2, top_n),
        "by_class": by_class,
    }
