"""SHAP attributions, mean-|SHAP| importance ranking and top-k selection.

Attributions use the interventional value function: a coalition keeps the
explained row's values for its features and takes the other features from
each background row in turn, averaging the model output.
"""

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import auto, StrEnum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import structlog
from joblib import delayed, Parallel
from scipy.special import comb

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import (
    BadKError,
    EmptyBackgroundError,
    EmptyInputError,
    FeatureMismatchError,
    TooManyFeaturesError,
)
from sentidrop.types import FloatMatrix, Labels, Predictor
from sentidrop.utils.seeding import BACKGROUND, derive_rng, derive_seed, PERMUTATIONS

logger = structlog.get_logger(__name__)

EXACT_FEATURE_LIMIT = 20
RETRAINED_FEATURE_LIMIT = 4
DEFAULT_BACKGROUND_SIZE = 100

# Rows per model call.
_BATCH_ROWS = 200_000


class ShapMode(StrEnum):
    EXACT = auto()
    SAMPLING = auto()


@dataclass(frozen=True, eq=False)
class ShapExplanation:
    """Attributions of one instance.

    ``base_value + values.sum()`` equals the model output on the instance
    (exactly up to rounding in exact mode).
    """

    instance_id: str
    values: np.ndarray
    base_value: float
    feature_names: tuple[str, ...]
    #: Standard errors of sampled attributions, None in exact mode.
    standard_errors: np.ndarray | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "base_value": self.base_value,
            "values": dict(zip(self.feature_names, self.values.tolist())),
        }


@dataclass(frozen=True)
class ImportanceRanking:
    """Features ordered by mean absolute attribution, highest first."""

    items: tuple[tuple[str, float], ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.items)

    def importance(self, name: str) -> float:
        return dict(self.items)[name]

    def __len__(self) -> int:
        return len(self.items)


def _check_inputs(x: np.ndarray, background: FloatMatrix) -> tuple[np.ndarray, FloatMatrix]:
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.asarray(background, dtype=np.float64)
    if background.ndim == 1:
        background = background.reshape(1, -1)
    if background.shape[0] == 0:
        raise EmptyBackgroundError()
    if background.shape[1] != x.size:
        raise ValueError(
            f"Background has {background.shape[1]} columns, instance has {x.size}"
        )
    return x, background


def _coalition_values(
    predict: Predictor, x: np.ndarray, background: FloatMatrix, masks: np.ndarray
) -> np.ndarray:
    """Mean model output for each coalition mask (rows of ``masks``)."""
    b = background.shape[0]
    chunk = max(1, _BATCH_ROWS // b)
    values = np.empty(masks.shape[0])
    for start in range(0, masks.shape[0], chunk):
        block = masks[start : start + chunk]
        Z = np.where(block[:, None, :], x, background[None, :, :]).reshape(-1, x.size)
        values[start : start + chunk] = (
            np.asarray(predict(Z), dtype=np.float64).reshape(block.shape[0], b).mean(axis=1)
        )
    return values


def _names(feature_names: Sequence[str] | None, m: int) -> tuple[str, ...]:
    return tuple(feature_names) if feature_names else tuple(f"x{j}" for j in range(m))


def shap_exact(
    predict: Predictor,
    x: np.ndarray,
    background: FloatMatrix,
    feature_names: Sequence[str] | None = None,
    instance_id: str = "",
) -> ShapExplanation:
    """Computes Shapley values by enumerating all feature subsets.

    Raises:
        TooManyFeaturesError: If there are more than 20 features.
        EmptyBackgroundError: If the background has no rows.
    """
    x, background = _check_inputs(x, background)
    m = x.size
    if m > EXACT_FEATURE_LIMIT:
        raise TooManyFeaturesError(m, EXACT_FEATURE_LIMIT)

    subsets = np.arange(2**m, dtype=np.int64)
    bits = np.arange(m, dtype=np.int64)
    masks = ((subsets[:, None] >> bits) & 1).astype(bool)
    v = _coalition_values(predict, x, background, masks)

    sizes = masks.sum(axis=1)
    # Weight of a coalition of size s excluding j: s! (m - s - 1)! / m!
    weights = 1.0 / (m * comb(m - 1, np.arange(m), exact=False))
    phi = np.zeros(m)
    for j in range(m):
        without = subsets[((subsets >> j) & 1) == 0]
        phi[j] = np.sum(weights[sizes[without]] * (v[without | (1 << j)] - v[without]))

    return ShapExplanation(instance_id, phi, float(v[0]), _names(feature_names, m))


def shap_sampling(
    predict: Predictor,
    x: np.ndarray,
    background: FloatMatrix,
    n_permutations: int,
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
    instance_id: str = "",
) -> ShapExplanation:
    """Estimates Shapley values from random feature permutations.

    Each permutation adds features one at a time; a feature's estimate is
    its mean marginal contribution. Standard errors are the sample
    deviation of contributions over the square root of ``n_permutations``.

    Raises:
        EmptyBackgroundError: If the background has no rows.
    """
    if n_permutations < 1:
        raise ValueError(f"n_permutations must be positive, got {n_permutations}")
    x, background = _check_inputs(x, background)
    m = x.size
    rng = derive_rng(seed, PERMUTATIONS)
    permutations = np.array([rng.permutation(m) for _ in range(n_permutations)])

    # For each permutation: the empty coalition, then growing prefixes.
    ranks = np.empty_like(permutations)
    rows = np.arange(n_permutations)[:, None]
    ranks[rows, permutations] = np.arange(m)
    steps = np.arange(m + 1)[None, :, None]
    masks = (ranks[:, None, :] < steps).reshape(-1, m)
    v = _coalition_values(predict, x, background, masks).reshape(n_permutations, m + 1)

    contributions = np.empty((n_permutations, m))
    contributions[rows, permutations] = np.diff(v, axis=1)
    phi = contributions.mean(axis=0)
    if n_permutations > 1:
        errors = contributions.std(axis=0, ddof=1) / np.sqrt(n_permutations)
    else:
        errors = np.zeros(m)
    return ShapExplanation(
        instance_id, phi, float(v[0, 0]), _names(feature_names, m), errors
    )


def shap_retrained(
    fit: Callable[[FloatMatrix, Labels], Predictor],
    X: FloatMatrix,
    y: Labels,
    x: np.ndarray,
    feature_names: Sequence[str] | None = None,
    instance_id: str = "",
) -> ShapExplanation:
    """Computes Shapley values by retraining a model on every feature subset.

    The value of a subset is the output, on the instance, of a model trained
    on those columns only. The empty subset is worth the positive rate of
    ``y``. Limited to 4 features.
    """
    X = np.asarray(X, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    m = x.size
    if m > RETRAINED_FEATURE_LIMIT:
        raise TooManyFeaturesError(m, RETRAINED_FEATURE_LIMIT)

    values: dict[frozenset[int], float] = {frozenset(): float(np.mean(y))}
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            columns = list(subset)
            model = fit(X[:, columns], y)
            values[frozenset(subset)] = float(np.asarray(model(x[columns].reshape(1, -1)))[0])

    weights = 1.0 / (m * comb(m - 1, np.arange(m), exact=False))
    phi = np.zeros(m)
    for j in range(m):
        for subset, value in values.items():
            if j not in subset:
                phi[j] += weights[len(subset)] * (values[subset | {j}] - value)
    return ShapExplanation(instance_id, phi, values[frozenset()], _names(feature_names, m))


def background_sample(
    n_rows: int,
    labels: Labels | None = None,
    size: int = DEFAULT_BACKGROUND_SIZE,
    seed: int = 0,
) -> np.ndarray:
    """Draws background row indices, stratified by label when given.

    Returns:
        Sorted row indices; all rows if ``size`` is not smaller than
        ``n_rows``.
    """
    if n_rows == 0:
        raise EmptyBackgroundError()
    if size >= n_rows:
        return np.arange(n_rows)
    rng = derive_rng(seed, BACKGROUND)
    if labels is None:
        return np.sort(rng.choice(n_rows, size=size, replace=False))

    labels = np.asarray(labels)
    positives = np.flatnonzero(labels == 1)
    negatives = np.flatnonzero(labels != 1)
    n_positive = int(round(size * positives.size / n_rows))
    n_positive = min(max(n_positive, 1 if positives.size else 0), positives.size)
    n_negative = min(size - n_positive, negatives.size)
    chosen = np.concatenate(
        [
            rng.choice(positives, size=n_positive, replace=False),
            rng.choice(negatives, size=n_negative, replace=False),
        ]
    )
    return np.sort(chosen)


def explain_rows(
    predict: Predictor,
    X: FeatureMatrix,
    background: FloatMatrix,
    mode: ShapMode = ShapMode.SAMPLING,
    n_permutations: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> list[ShapExplanation]:
    """Explains every row of ``X``, in row order.

    Each sampled row draws its permutations from a stream derived from
    ``seed`` and the row index.
    """
    values = X.require_imputed()
    ids = X.row_ids or tuple(str(i) for i in range(X.n_rows))
    if ShapMode(mode) is ShapMode.EXACT:
        tasks = (
            delayed(shap_exact)(predict, values[i], background, X.column_names, ids[i])
            for i in range(X.n_rows)
        )
    else:
        tasks = (
            delayed(shap_sampling)(
                predict,
                values[i],
                background,
                n_permutations,
                derive_seed(seed, PERMUTATIONS, i),
                X.column_names,
                ids[i],
            )
            for i in range(X.n_rows)
        )
    explanations = Parallel(n_jobs=threads)(tasks)
    logger.debug("Explained rows", n_rows=len(explanations), mode=str(mode))
    return explanations


def rank_importance(explanations: Sequence[ShapExplanation]) -> ImportanceRanking:
    """Ranks features by mean absolute attribution.

    Ties are ordered by feature name.

    Raises:
        EmptyInputError: If there are no explanations.
        FeatureMismatchError: If explanations disagree on features.
    """
    if not explanations:
        raise EmptyInputError()
    names = explanations[0].feature_names
    for explanation in explanations[1:]:
        if explanation.feature_names != names:
            raise FeatureMismatchError(names, explanation.feature_names)
    importance = np.mean([np.abs(e.values) for e in explanations], axis=0)
    items = sorted(
        ((name, float(value)) for name, value in zip(names, importance)),
        key=lambda item: (-item[1], item[0]),
    )
    return ImportanceRanking(tuple(items))


def select_top_k(ranking: ImportanceRanking, k: int) -> tuple[str, ...]:
    """Names of the ``k`` most important features, most important first.

    Raises:
        BadKError: If ``k`` is not within [1, m].
    """
    if not 1 <= k <= len(ranking):
        raise BadKError(k, len(ranking))
    return ranking.names[:k]


def write_explanations(path: Path, explanations: Sequence[ShapExplanation]) -> None:
    if not explanations:
        raise EmptyInputError()
    names = explanations[0].feature_names
    frame = pd.DataFrame(
        [e.values for e in explanations], columns=list(names), dtype=np.float64
    )
    frame.insert(0, "base_value", [e.base_value for e in explanations])
    frame.insert(0, "instance_id", [e.instance_id for e in explanations])
    frame.to_csv(path, index=False, lineterminator="\n")


def write_ranking(path: Path, ranking: ImportanceRanking) -> None:
    pd.DataFrame(
        {
            "rank": range(1, len(ranking) + 1),
            "feature": list(ranking.names),
            "importance": [value for _, value in ranking.items],
        }
    ).to_csv(path, index=False, lineterminator="\n")
