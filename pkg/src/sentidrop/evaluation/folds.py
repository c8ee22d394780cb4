"""Fold plans that never split one student across training and test sets."""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Self

import numpy as np
import structlog

from sentidrop.core_data import Dataset
from sentidrop.errors import ConfigError, TooFewGroupsError
from sentidrop.types import StudentId
from sentidrop.utils.seeding import derive_rng, FOLDS

logger = structlog.get_logger(__name__)

DEFAULT_FOLDS = 5


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of students to folds.

    Students absent from ``assignments`` take part in no fold, neither for
    training nor for testing.
    """

    k: int
    assignments: dict[StudentId, int]
    #: Folds held out in turn; every fold when None.
    test_folds: tuple[int, ...] | None = None

    @property
    def evaluated_folds(self) -> tuple[int, ...]:
        return self.test_folds if self.test_folds is not None else tuple(range(self.k))

    def fold_of(self, student_id: StudentId) -> int | None:
        return self.assignments.get(student_id)

    def members(self, fold: int) -> tuple[StudentId, ...]:
        return tuple(sorted(s for s, f in self.assignments.items() if f == fold))

    def train_test(
        self, student_ids: Sequence[StudentId], fold: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Row indices of training and test students for one held-out fold."""
        folds = np.array([self.assignments.get(s, -1) for s in student_ids])
        train = np.flatnonzero((folds != fold) & (folds >= 0))
        test = np.flatnonzero(folds == fold)
        return train, test

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "test_folds": list(self.evaluated_folds),
            "assignments": dict(sorted(self.assignments.items())),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        test_folds = d.get("test_folds")
        return cls(
            int(d["k"]),
            {str(s): int(f) for s, f in d["assignments"].items()},
            tuple(test_folds) if test_folds is not None else None,
        )


def group_kfold(groups: Sequence[StudentId], k: int = DEFAULT_FOLDS, seed: int = 0) -> FoldPlan:
    """Shuffles distinct groups by seed and deals them round-robin to k folds.

    Args:
        groups: Student ID of every row; repeated IDs share a fold.
        k: Number of folds, at least 2.
        seed: Root seed.

    Raises:
        TooFewGroupsError: If there are fewer distinct groups than folds.
    """
    unique = sorted(set(groups))
    if k < 2 or len(unique) < k:
        raise TooFewGroupsError(len(unique), k)
    order = derive_rng(seed, FOLDS).permutation(len(unique))
    assignments = {unique[j]: i % k for i, j in enumerate(order)}
    logger.debug("Planned group folds", k=k, n_groups=len(unique))
    return FoldPlan(k, assignments)


def year_holdout(dataset: Dataset, column: str, test_year: int) -> FoldPlan:
    """Trains on years before ``test_year`` and tests on ``test_year``.

    Students of later years are left out. The plan has two folds: 0 for
    training, 1 (the only evaluated fold) for testing.

    Raises:
        ConfigError: If the column is unknown or either side is empty.
    """
    if column not in dataset.feature_names:
        raise ConfigError("cv.year_column", f"unknown column '{column}'")
    years = dataset.matrix.column(column)
    assignments: dict[StudentId, int] = {}
    for student_id, year in zip(dataset.student_ids, years):
        if np.isnan(year) or year > test_year:
            continue
        assignments[student_id] = 1 if year == test_year else 0
    n_test = sum(assignments.values())
    if n_test == 0 or n_test == len(assignments):
        raise ConfigError(
            "cv.test_year", f"year {test_year} leaves an empty training or test set"
        )
    return FoldPlan(2, assignments, test_folds=(1,))
