import json
import math
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from sentidrop.core_data import CommentSet, FeatureMatrix
from sentidrop.errors import (
    DegenerateSampleError,
    MissingClassError,
    ScoreRangeError,
    UnknownFormatVersionError,
    ZeroVarianceError,
)
from sentidrop.sentiment import (
    aggregate_monthly,
    classify_score,
    corpus_statistics,
    first_last_differences,
    interaction_risk,
    load_external_scores,
    load_scorer,
    neutral_features,
    paired_ttest,
    save_scorer,
    score_comments,
    SentimentScore,
    SentimentScorer,
    sentiment_features_from_scores,
    t_two_sided_p_value,
    temporal_risk,
    train_scorer,
)
from sentidrop.types import SentimentClass
from sentidrop.utils.dates import parse_iso_datetime

from tests.helpers import approx, make_comment

TERM_START = date(2024, 9, 1)

POSITIVE_TEXTS = (
    "great course love it",
    "love the great lectures",
    "really enjoying the course",
    "great tutor love the labs",
    "enjoying every lecture great",
    "love this wonderful class",
)
NEGATIVE_TEXTS = (
    "awful boring hate it",
    "hate the boring lectures",
    "really stressed and lost",
    "awful workload hate deadlines",
    "boring class feel lost",
    "stressed awful week hate",
)
NEUTRAL_TEXTS = (
    "exam is on friday",
    "room changed to building",
    "lecture starts at nine",
    "submitted the assignment today",
    "exam schedule posted online",
    "lab moved to building",
)


def make_score(student_id: str, timestamp: str, value: float) -> SentimentScore:
    return SentimentScore(
        student_id, parse_iso_datetime(timestamp), value, classify_score(value)
    )


@pytest.fixture(scope="module")
def toy_corpus() -> CommentSet:
    comments = []
    for label, texts in [
        ("positive", POSITIVE_TEXTS),
        ("negative", NEGATIVE_TEXTS),
        ("neutral", NEUTRAL_TEXTS),
    ]:
        for i, text in enumerate(texts):
            comments.append(
                make_comment(f"{label[0]}{i}", "2024-09-10T12:00:00Z", text, label)
            )
    return CommentSet(comments)


@pytest.fixture(scope="module")
def toy_scorer(toy_corpus) -> SentimentScorer:
    return train_scorer(toy_corpus, seed=1)


@pytest.mark.parametrize(
    "value,expected",
    [
        (0.2, SentimentClass.POSITIVE),
        (0.19, SentimentClass.NEUTRAL),
        (-0.2, SentimentClass.NEGATIVE),
        (0.0, SentimentClass.NEUTRAL),
    ],
)
def test_classify_score(value: float, expected: SentimentClass):
    assert classify_score(value) is expected


class TestScorer:
    def test_polarity_of_unseen_texts(self, toy_scorer):
        assert toy_scorer.score_text("I love this great course") > 0
        assert toy_scorer.score_text("so boring and awful, I hate it") < 0

    def test_scores_bounded_and_blank_is_zero(self, toy_scorer):
        scores = toy_scorer.score_texts(["great", "   ", "hate"])
        assert np.all(np.abs(scores) <= 1.0)
        assert scores[1] == 0.0

    def test_holdout_accuracy(self, toy_scorer):
        assert 0.0 <= toy_scorer.holdout_accuracy <= 1.0

    def test_missing_class(self, toy_corpus):
        without_neutral = toy_corpus.filter(
            lambda c: c.gold_label is not SentimentClass.NEUTRAL
        )
        with pytest.raises(MissingClassError) as exc_info:
            train_scorer(without_neutral)
        assert exc_info.value.label == "neutral"

    def test_saved_scorer_scores_identically(self, tmp_path: Path, toy_scorer, toy_corpus):
        save_scorer(toy_scorer, tmp_path / "scorer.json")
        loaded = load_scorer(tmp_path / "scorer.json")
        texts = [c.text for c in toy_corpus]
        assert np.array_equal(loaded.score_texts(texts), toy_scorer.score_texts(texts))

    def test_unknown_format_version(self, toy_scorer):
        d = toy_scorer.to_dict() | {"format_version": 99}
        with pytest.raises(UnknownFormatVersionError):
            SentimentScorer.from_dict(d)

    def test_score_comments_keeps_order(self, toy_scorer, toy_corpus):
        scores = score_comments(toy_scorer, toy_corpus)
        assert [s.student_id for s in scores] == [c.student_id for c in toy_corpus]


class TestExternalScores:
    def test_loads_and_classifies(self, tmp_path: Path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            '{"student_id": "S2", "timestamp": "2024-09-02T00:00:00Z", "score": -0.5}\n'
            '{"student_id": "S1", "timestamp": "2024-09-01T00:00:00Z", "score": 0.1}\n'
        )
        scores = load_external_scores(path)
        assert [s.student_id for s in scores] == ["S1", "S2"]
        assert scores[1].sentiment_class is SentimentClass.NEGATIVE

    def test_out_of_range(self, tmp_path: Path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            json.dumps({"student_id": "S1", "timestamp": "2024-09-01", "score": 1.5})
        )
        with pytest.raises(ScoreRangeError):
            load_external_scores(path)


def test_aggregate_monthly():
    monthly = aggregate_monthly(
        [
            make_score("S1", "2024-09-01T00:00:00Z", 0.5),
            make_score("S1", "2024-09-30T23:00:00Z", -0.1),
            make_score("S1", "2024-10-01T00:00:00Z", 1.0),
        ]
    )
    assert [(m.month, m.comment_count) for m in monthly] == [("2024-09", 2), ("2024-10", 1)]
    assert monthly[0].mean_score == pytest.approx(0.2)


@pytest.mark.parametrize("seed", range(10))
def test_aggregate_monthly_conserves_score_mass(seed: int):
    rng = np.random.default_rng(seed)
    scores = [
        make_score(
            f"S{rng.integers(5)}",
            f"2024-{rng.integers(1, 13):02d}-{rng.integers(1, 29):02d}T12:00:00Z",
            float(rng.uniform(-1.0, 1.0)),
        )
        for _ in range(200)
    ]
    monthly = aggregate_monthly(scores)
    assert sum(m.comment_count for m in monthly) == len(scores)
    total = math.fsum(m.mean_score * m.comment_count for m in monthly)
    assert total == pytest.approx(math.fsum(s.score for s in scores), abs=1e-9)


class TestPairedTTest:
    def test_known_values(self):
        result = paired_ttest([1.0, 2.0, 3.0])
        assert result.t_statistic == approx(3.4641)
        assert result.degrees_of_freedom == 2
        assert result.p_value_two_sided == approx(0.0742)
        assert result.sample_stddev == pytest.approx(1.0)

    def test_p_value_at_critical_t(self):
        assert t_two_sided_p_value(2.228, 10) == approx(0.05, abs=1e-3)

    def test_constant_differences_at_mu0(self):
        result = paired_ttest([0.5, 0.5, 0.5], mu0=0.5)
        assert result.t_statistic == 0.0
        assert result.p_value_two_sided == 1.0

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            paired_ttest([0.5, 0.5, 0.5])

    def test_degenerate_sample(self):
        with pytest.raises(DegenerateSampleError):
            paired_ttest([1.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_sign_symmetry(self, seed: int):
        d = np.random.default_rng(seed).normal(0.3, 1.0, size=12)
        result, mirrored = paired_ttest(d), paired_ttest(-d)
        assert mirrored.t_statistic == pytest.approx(-result.t_statistic, rel=1e-12)
        assert mirrored.p_value_two_sided == pytest.approx(
            result.p_value_two_sided, rel=1e-12
        )

    @pytest.mark.parametrize("scale", [1e-3, 0.5, 7.0, 1e4])
    def test_scale_invariance(self, scale: float):
        d = np.random.default_rng(1).normal(0.3, 1.0, size=12)
        result, scaled = paired_ttest(d), paired_ttest(scale * d)
        assert scaled.t_statistic == pytest.approx(result.t_statistic, rel=1e-9)
        assert scaled.p_value_two_sided == pytest.approx(
            result.p_value_two_sided, rel=1e-9
        )


class TestSentimentFeatures:
    @pytest.fixture()
    def features(self) -> FeatureMatrix:
        scores = [
            make_score("S1", "2024-09-05T00:00:00Z", -0.5),
            make_score("S1", "2024-11-20T00:00:00Z", 0.5),
        ]
        return sentiment_features_from_scores(
            scores, TERM_START, ["S1", "S2"], include_shift=True
        )

    def test_commenting_student(self, features):
        row = dict(zip(features.column_names, features.values[0]))
        assert row == {
            "sentiment_mean": 0.0,
            "sentiment_first_month": -0.5,
            "sentiment_last_month": 0.5,
            "comment_count": 2.0,
            "negative_fraction": 0.5,
            "has_comments": 1.0,
            "first_month_count": 1.0,
            "sentiment_shift": -1.0,
        }

    def test_silent_student_is_neutral(self, features):
        assert features.row_ids == ("S1", "S2")
        assert not features.values[1].any()
        assert neutral_features(["S2"], include_shift=True).equals(features.select_rows([1]))

    def test_first_last_differences(self, features):
        assert first_last_differences(features).tolist() == [-1.0]


def test_temporal_risk():
    scores = [
        make_score("A", "2024-09-03T00:00:00Z", -0.6),
        make_score("B", "2024-09-03T00:00:00Z", 0.5),
        make_score("B", "2024-10-03T00:00:00Z", -0.5),
        make_score("C", "2024-09-03T00:00:00Z", 0.7),
    ]
    features = sentiment_features_from_scores(scores, TERM_START, ["A", "B", "C", "D"])
    report = temporal_risk(features, np.array([1, 1, 0, 0]))
    assert report.early_negative.count == 1
    assert report.late_negative.count == 1
    assert report.never_negative.count == 2
    assert report.rates == (1.0, 1.0, 0.0)


def test_interaction_risk():
    features = FeatureMatrix.from_array(
        [[-0.5], [-0.5], [0.0], [0.0], [0.5], [0.5]], ("sentiment_mean",)
    )
    report = interaction_risk(
        features, np.arange(1.0, 7.0), np.array([1, 1, 0, 1, 0, 0])
    )
    assert report.rate("low", SentimentClass.NEGATIVE) == 1.0
    assert report.rate("mid", SentimentClass.NEUTRAL) == 0.5
    assert report.rate("high", SentimentClass.POSITIVE) == 0.0
    assert report.rate("low", SentimentClass.POSITIVE) is None
    assert len(report.to_rows()) == 9


def test_corpus_statistics(toy_comments):
    stats = corpus_statistics(toy_comments, top_n=5)
    assert stats["n_comments"] == 4
    assert stats["n_students"] == 3
    assert stats["by_class"]["negative"]["count"] == 1
    assert all(count >= 1 for _, count in stats["unigrams"])
