"""Binary decision trees grown by exact greedy split search.

Split candidates are midpoints between adjacent distinct sorted values.
Ties between equally good splits go to the lowest feature index, then to
the smallest threshold.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, Self

import numpy as np

from sentidrop.types import FloatMatrix, Labels

#: Maps (left sums, total sums) over split positions to (gain, valid mask).
GainFunction = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, slots=True)
class TreeNode:
    """A tree node: internal (feature, threshold, two children) or a leaf."""

    value: float
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def __post_init__(self):
        if (self.left is None) != (self.right is None):
            raise ValueError("An internal node must have exactly two children")
        if not self.is_leaf and (self.feature is None or self.threshold is None):
            raise ValueError("An internal node needs a feature and a threshold")
        if not np.isfinite(self.value):
            raise ValueError(f"Node value must be finite, got {self.value}")

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True, eq=False)
class Tree:
    """A tree flattened into parallel arrays (pre-order, root at 0).

    Leaves have feature -1. Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def from_node(cls, root: TreeNode) -> Self:
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(node: TreeNode) -> int:
            index = len(value)
            feature.append(-1 if node.is_leaf else node.feature)
            threshold.append(0.0 if node.is_leaf else node.threshold)
            value.append(node.value)
            left.append(-1)
            right.append(-1)
            if not node.is_leaf:
                left[index] = visit(node.left)
                right[index] = visit(node.right)
            return index

        visit(root)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
        )

    @property
    def n_nodes(self) -> int:
        return self.value.size

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def predict(self, X: FloatMatrix) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            current = node[active]
            features = self.feature[current]
            go_left = X[active, features] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
        )


@dataclass(frozen=True)
class Split:
    gain: float
    feature: int
    threshold: float


def _midpoint(a: float, b: float) -> float:
    middle = a + (b - a) / 2
    return middle if a <= middle < b else a


def find_best_split(
    X: FloatMatrix,
    rows: np.ndarray,
    features: Sequence[int],
    stats: np.ndarray,
    gain_function: GainFunction,
) -> Split | None:
    """Scans all features for the best split of ``rows``.

    Args:
        X: The full training matrix.
        rows: Indices of the node's rows (may repeat for bootstrap samples).
        features: Candidate feature indices, ascending.
        stats: Per-row statistics, shape (len(rows), s), summed on each side.
        gain_function: Scores split positions from cumulative left sums.

    Returns:
        The best split, or None if no position is valid.
    """
    n = rows.size
    if n < 2:
        return None
    total = stats.sum(axis=0)
    best: Split | None = None
    for j in features:
        x = X[rows, j]
        order = np.argsort(x, kind="stable")
        x_sorted = x[order]
        distinct = x_sorted[:-1] < x_sorted[1:]
        if not distinct.any():
            continue
        left = np.cumsum(stats[order], axis=0)[:-1]
        gain, valid = gain_function(left, total)
        valid &= distinct
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best.gain:
            best = Split(float(gain[i]), int(j), _midpoint(x_sorted[i], x_sorted[i + 1]))
    return best


@dataclass(frozen=True)
class GrowthLimits:
    max_depth: int | None = None
    #: Minimum rows per leaf.
    min_leaf: int = 1
    #: Features drawn per split, or None for all.
    max_features: int | None = None


def _gini(positives: np.ndarray, counts: np.ndarray) -> np.ndarray:
    p = positives / counts
    return 2.0 * p * (1.0 - p)


def gini_gain_function(min_leaf: int) -> GainFunction:
    """Impurity decrease of a split; stats columns are (count, positives)."""

    def gain(left: np.ndarray, total: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, pos = total
        n_left, pos_left = left[:, 0], left[:, 1]
        n_right, pos_right = n - n_left, pos - pos_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        with np.errstate(divide="ignore", invalid="ignore"):
            children = (
                n_left * _gini(pos_left, n_left) + n_right * _gini(pos_right, n_right)
            ) / n
        return _gini(np.array(pos), np.array(n)) - children, valid

    return gain


def _vote(positives: float, count: float) -> float:
    """Majority vote of a leaf; a tie votes positive."""
    return 1.0 if positives * 2 >= count else 0.0


def grow_classification_tree(
    X: FloatMatrix,
    y: Labels,
    rows: np.ndarray | None = None,
    limits: GrowthLimits | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grows a CART tree with Gini impurity.

    Leaves vote 1 or 0 by majority, 1 on a tie. Impure nodes are split
    while a valid split exists, even one with zero impurity decrease.
    """
    limits = limits or GrowthLimits()
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows)
    m = X.shape[1]
    gain_function = gini_gain_function(limits.min_leaf)

    def candidate_features() -> np.ndarray:
        if limits.max_features is None or limits.max_features >= m or rng is None:
            return np.arange(m)
        return np.sort(rng.choice(m, size=limits.max_features, replace=False))

    def grow(node_rows: np.ndarray, depth: int) -> TreeNode:
        labels = y[node_rows]
        count, positives = labels.size, int(labels.sum())
        value = _vote(positives, count)
        if (
            positives in (0, count)
            or (limits.max_depth is not None and depth >= limits.max_depth)
            or count < 2 * limits.min_leaf
        ):
            return TreeNode(value)
        stats = np.column_stack([np.ones(count), labels.astype(np.float64)])
        split = find_best_split(X, node_rows, candidate_features(), stats, gain_function)
        if split is None:
            return TreeNode(value)
        goes_left = X[node_rows, split.feature] <= split.threshold
        return TreeNode(
            value,
            split.feature,
            split.threshold,
            grow(node_rows[goes_left], depth + 1),
            grow(node_rows[~goes_left], depth + 1),
        )

    return Tree.from_node(grow(rows, 0))


@dataclass(frozen=True)
class NewtonLimits:
    max_depth: int = 3
    lambda_l2: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    features: tuple[int, ...] | None = field(default=None)


def newton_gain_function(limits: NewtonLimits) -> GainFunction:
    """Second-order gain; stats columns are (gradient, hessian)."""
    lam = limits.lambda_l2

    def gain(left: np.ndarray, total: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        G, H = total
        G_left, H_left = left[:, 0], left[:, 1]
        G_right, H_right = G - G_left, H - H_left
        valid = (H_left >= limits.min_child_weight) & (
            H_right >= limits.min_child_weight
        )
        score = 0.5 * (
            G_left**2 / (H_left + lam)
            + G_right**2 / (H_right + lam)
            - G**2 / (H + lam)
        )
        return score - limits.gamma, valid

    return gain


def grow_newton_tree(
    X: FloatMatrix,
    gradients: np.ndarray,
    hessians: np.ndarray,
    limits: NewtonLimits,
    learning_rate: float,
    rows: np.ndarray | None = None,
) -> Tree:
    """Grows a regression tree on gradient statistics.

    Leaves hold the shrunken Newton step ``-learning_rate * G / (H + lambda)``.
    A split is kept only if its gain minus gamma is positive.
    """
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows)
    features = (
        np.arange(X.shape[1]) if limits.features is None else np.array(limits.features)
    )
    gain_function = newton_gain_function(limits)
    stats_all = np.column_stack([gradients, hessians])

    def grow(node_rows: np.ndarray, depth: int) -> TreeNode:
        stats = stats_all[node_rows]
        G, H = stats.sum(axis=0)
        value = float(-learning_rate * G / (H + limits.lambda_l2))
        if depth >= limits.max_depth:
            return TreeNode(value)
        split = find_best_split(X, node_rows, features, stats, gain_function)
        if split is None or not split.gain > 0:
            return TreeNode(value)
        goes_left = X[node_rows, split.feature] <= split.threshold
        return TreeNode(
            value,
            split.feature,
            split.threshold,
            grow(node_rows[goes_left], depth + 1),
            grow(node_rows[~goes_left], depth + 1),
        )

    return Tree.from_node(grow(rows, 0))
