"""Shared data model: student records, datasets, comments and feature matrices.

Tabular data is read from CSV (``student_id`` first, optional ``label`` last)
and comments from JSON Lines. Missing cells are tracked by an explicit mask
rather than by magic numbers.
"""

import json
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property
from pathlib import Path
from typing import Any, overload, Self

import numpy as np
import pandas as pd
import structlog

from sentidrop.errors import (
    BadTimestampError,
    DuplicateStudentIdError,
    EmptyTextError,
    InvalidDatasetError,
    MalformedJsonError,
    MissingColumnError,
    NonNumericCellError,
    NotImputedError,
    SchemaMismatchError,
)
from sentidrop.types import (
    BoolMatrix,
    FloatMatrix,
    Labels,
    SentimentClass,
    StudentId,
)
from sentidrop.utils.dates import format_iso_datetime, parse_iso_datetime

__all__ = (
    "Comment",
    "CommentSet",
    "Dataset",
    "FeatureMatrix",
    "StudentRecord",
    "ValidationReport",
    "load_comments",
    "load_tabular",
    "validate",
    "write_comments",
    "write_tabular",
)

logger = structlog.get_logger(__name__)

STUDENT_ID_COLUMN = "student_id"
LABEL_COLUMN = "label"


def _frozen_array(value: Any, dtype: Any) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An n×m numeric grid with a missing-value mask.

    Masked cells hold NaN, which consumers never read: training code requires
    a fully imputed matrix (see :meth:`require_imputed`).
    """

    values: FloatMatrix
    missing_mask: BoolMatrix
    column_names: tuple[str, ...]
    #: Student IDs of the rows, or empty for anonymous matrices.
    row_ids: tuple[StudentId, ...] = ()

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64)
        if values.ndim != 2:
            values = _frozen_array(values.reshape(len(values), -1), np.float64)
        mask = _frozen_array(self.missing_mask, bool).reshape(values.shape)
        if values.shape[1] != len(self.column_names):
            raise InvalidDatasetError(
                f"{values.shape[1]} columns but {len(self.column_names)} names"
            )
        if self.row_ids and len(self.row_ids) != values.shape[0]:
            raise InvalidDatasetError(
                f"{values.shape[0]} rows but {len(self.row_ids)} row IDs"
            )
        if mask.any():
            values = values.copy()
            values[mask] = np.nan
            values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))

    @classmethod
    def from_array(
        cls,
        values: Any,
        column_names: Sequence[str],
        row_ids: Sequence[StudentId] = (),
    ) -> Self:
        """Creates a matrix treating NaN cells as missing."""
        array = np.asarray(values, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        return cls(array, np.isnan(array), tuple(column_names), tuple(row_ids))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def is_imputed(self) -> bool:
        return not self.missing_mask.any()

    def require_imputed(self) -> FloatMatrix:
        """Returns the values, or raises if any cell is still missing."""
        if not self.is_imputed:
            raise NotImputedError()
        return self.values

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def select_columns(self, names: Sequence[str]) -> Self:
        indices = [self.column_names.index(name) for name in names]
        return type(self)(
            self.values[:, indices],
            self.missing_mask[:, indices],
            tuple(names),
            self.row_ids,
        )

    def drop_columns(self, names: Iterable[str]) -> Self:
        dropped = set(names)
        return self.select_columns([c for c in self.column_names if c not in dropped])

    def select_rows(self, indices: Sequence[int] | np.ndarray) -> Self:
        indices = np.asarray(indices, dtype=int)
        row_ids = tuple(self.row_ids[i] for i in indices) if self.row_ids else ()
        return type(self)(
            self.values[indices], self.missing_mask[indices], self.column_names, row_ids
        )

    def hstack(self, other: "FeatureMatrix") -> Self:
        """Concatenates columns of a matrix with the same rows."""
        if self.row_ids != other.row_ids or self.n_rows != other.n_rows:
            raise InvalidDatasetError("Cannot concatenate matrices with different rows")
        return type(self)(
            np.hstack([self.values, other.values]),
            np.hstack([self.missing_mask, other.missing_mask]),
            self.column_names + other.column_names,
            self.row_ids,
        )

    def with_values(self, values: FloatMatrix) -> Self:
        """Returns a fully observed matrix with the same names and rows."""
        return type(self)(
            values, np.zeros(values.shape, dtype=bool), self.column_names, self.row_ids
        )

    def equals(self, other: "FeatureMatrix") -> bool:
        return (
            self.column_names == other.column_names
            and self.row_ids == other.row_ids
            and np.array_equal(self.missing_mask, other.missing_mask)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True, slots=True)
class StudentRecord:
    """Represents one student: features and an optional dropout label."""

    #: Unique student identifier.
    student_id: StudentId
    #: Feature name to value, with None for missing.
    features: Mapping[str, float | None]
    #: 1 for dropout, 0 for active, None if unknown.
    label: int | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise InvalidDatasetError(
                f"Label of '{self.student_id}' must be 0 or 1, got {self.label!r}"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of student records sharing a feature schema."""

    records: tuple[StudentRecord, ...]
    #: Feature names; defines the column order.
    feature_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        seen: set[StudentId] = set()
        expected = set(self.feature_names)
        for record in self.records:
            if record.student_id in seen:
                raise DuplicateStudentIdError(record.student_id)
            seen.add(record.student_id)
            if set(record.features) != expected:
                raise InvalidDatasetError(
                    f"Record '{record.student_id}' does not match feature names"
                )

    @classmethod
    def from_matrix(
        cls, fm: FeatureMatrix, labels: Sequence[int | None] | None = None
    ) -> Self:
        if not fm.row_ids:
            raise InvalidDatasetError("Feature matrix rows have no student IDs")
        records = []
        for i, student_id in enumerate(fm.row_ids):
            features = {
                name: None if fm.missing_mask[i, j] else float(fm.values[i, j])
                for j, name in enumerate(fm.column_names)
            }
            label = None if labels is None or labels[i] is None else int(labels[i])
            records.append(StudentRecord(student_id, features, label))
        return cls(tuple(records), fm.column_names)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def m(self) -> int:
        return len(self.feature_names)

    @cached_property
    def student_ids(self) -> tuple[StudentId, ...]:
        return tuple(record.student_id for record in self.records)

    @property
    def has_labels(self) -> bool:
        return all(record.label is not None for record in self.records)

    @cached_property
    def matrix(self) -> FeatureMatrix:
        values = np.array(
            [
                [
                    np.nan if (v := record.features[name]) is None else v
                    for name in self.feature_names
                ]
                for record in self.records
            ],
            dtype=np.float64,
        ).reshape(self.n, self.m)
        return FeatureMatrix(values, np.isnan(values), self.feature_names, self.student_ids)

    def labels(self) -> Labels:
        """Gets labels as an array.

        Raises:
            InvalidDatasetError: If any record is unlabeled.
        """
        if not self.has_labels:
            raise InvalidDatasetError("Dataset has unlabeled records")
        return np.array([record.label for record in self.records], dtype=int)

    def subset(self, student_ids: Iterable[StudentId]) -> Self:
        """Gets records of the given students, in dataset order."""
        wanted = set(student_ids)
        return type(self)(
            tuple(r for r in self.records if r.student_id in wanted), self.feature_names
        )

    def drop_features(self, names: Iterable[str]) -> Self:
        dropped = set(names)
        kept = tuple(name for name in self.feature_names if name not in dropped)
        records = tuple(
            StudentRecord(r.student_id, {k: r.features[k] for k in kept}, r.label)
            for r in self.records
        )
        return type(self)(records, kept)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and self.student_ids == other.student_ids
            and [r.label for r in self.records] == [r.label for r in other.records]
            and self.matrix.equals(other.matrix)
        )


@dataclass(frozen=True, slots=True)
class Comment:
    """A timestamped free-text comment written by a student."""

    student_id: StudentId
    #: An aware UTC date.
    timestamp: datetime
    text: str
    #: Optional class used to train a scorer.
    gold_label: SentimentClass | None = None

    def to_dict(self) -> dict:
        output = {
            "student_id": self.student_id,
            "timestamp": format_iso_datetime(self.timestamp),
            "text": self.text,
        }
        if self.gold_label is not None:
            output["gold_label"] = str(self.gold_label)
        return output


def _comment_sort_key(comment: Comment) -> tuple:
    return (comment.student_id, comment.timestamp, comment.text)


class CommentSet(Sequence[Comment]):
    """An immutable sequence of comments ordered by (student, timestamp)."""

    def __init__(self, comments: Iterable[Comment] | None = None) -> None:
        self._elements: tuple[Comment, ...] = tuple(
            sorted(comments or [], key=_comment_sort_key)
        )

    @classmethod
    def from_dicts(cls, dicts: Iterable[dict]) -> Self:
        comments = []
        for d in dicts:
            gold = d.get("gold_label")
            comments.append(
                Comment(
                    student_id=str(d["student_id"]),
                    timestamp=parse_iso_datetime(d["timestamp"]),
                    text=d["text"],
                    gold_label=SentimentClass(gold) if gold else None,
                )
            )
        return cls(comments)

    @overload
    def __getitem__(self, index: int) -> Comment: ...

    @overload
    def __getitem__(self, index: slice) -> "CommentSet": ...

    def __getitem__(self, index):
        if isinstance(index, slice):
            return type(self)(self._elements[index])
        return self._elements[index]

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self) -> Iterator[Comment]:
        return iter(self._elements)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, CommentSet):
            return NotImplemented
        return self._elements == other._elements

    def __repr__(self) -> str:
        return f"{type(self).__name__}(size={len(self)})"

    @property
    def student_ids(self) -> tuple[StudentId, ...]:
        """Distinct student IDs, sorted."""
        return tuple(sorted({c.student_id for c in self._elements}))

    def by_student(self) -> dict[StudentId, tuple[Comment, ...]]:
        grouped: dict[StudentId, list[Comment]] = {}
        for comment in self._elements:
            grouped.setdefault(comment.student_id, []).append(comment)
        return {k: tuple(v) for k, v in grouped.items()}

    def filter(self, predicate: Callable[[Comment], bool]) -> "CommentSet":
        """Filters comments by a predicate function.

        Returns:
            A new instance of this class with filtered comments.
        """
        return type(self)(filter(predicate, self._elements))

    def for_students(self, student_ids: Iterable[StudentId]) -> "CommentSet":
        wanted = set(student_ids)
        return self.filter(lambda c: c.student_id in wanted)

    def labeled(self) -> "CommentSet":
        """Comments that carry a gold label."""
        return self.filter(lambda c: c.gold_label is not None)


@dataclass(frozen=True)
class ValidationReport:
    """Consistency report of a dataset and its comments."""

    n_records: int
    n_features: int
    n_comments: int
    #: Commenting students absent from the dataset.
    orphan_student_ids: tuple[StudentId, ...]
    missing_rates: dict[str, float]
    n_labeled: int
    #: Share of dropouts among labeled records.
    positive_rate: float | None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_features": self.n_features,
            "n_comments": self.n_comments,
            "orphan_student_ids": list(self.orphan_student_ids),
            "missing_rates": self.missing_rates,
            "n_labeled": self.n_labeled,
            "positive_rate": self.positive_rate,
            "warnings": list(self.warnings),
        }


def _parse_label(value: str, line: int) -> int | None:
    if not value:
        return None
    try:
        number = float(value)
    except ValueError:
        number = float("nan")
    if number not in (0.0, 1.0):
        raise InvalidDatasetError(f"Label at line {line} must be 0 or 1, got {value!r}")
    return int(number)


def load_tabular(path: Path, schema: Sequence[str] | None = None) -> Dataset:
    """Loads a dataset from a CSV file.

    Args:
        path: A CSV file with a header row and a ``student_id`` column, and
          optionally a ``label`` column.
        schema: Expected feature columns, in order.

    Returns:
        A :class:`Dataset` with features in header order. Blank cells are
        missing.

    Raises:
        MissingColumnError: If there is no ``student_id`` column.
        DuplicateStudentIdError: If an ID repeats.
        NonNumericCellError: If a feature cell is not a number. The reported
          row is the line number in the file.
        SchemaMismatchError: If features differ from ``schema``.
    """
    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8"
    )
    if STUDENT_ID_COLUMN not in frame.columns:
        raise MissingColumnError(STUDENT_ID_COLUMN)

    feature_names = tuple(
        c for c in frame.columns if c not in (STUDENT_ID_COLUMN, LABEL_COLUMN)
    )
    if schema is not None and tuple(schema) != feature_names:
        raise SchemaMismatchError(schema, feature_names)

    ids = frame[STUDENT_ID_COLUMN].str.strip()
    if (duplicated := ids[ids.duplicated()]).size:
        raise DuplicateStudentIdError(duplicated.iloc[0])

    n, m = len(frame), len(feature_names)
    values = np.full((n, m), np.nan)
    for j, name in enumerate(feature_names):
        cells = frame[name].str.strip()
        blank = cells == ""
        numeric = pd.to_numeric(cells.where(~blank), errors="coerce")
        bad = ~blank & numeric.isna()
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise NonNumericCellError(i + 2, name, frame[name].iloc[i])
        values[:, j] = numeric.to_numpy(dtype=np.float64)

    labels: list[int | None] = [None] * n
    if LABEL_COLUMN in frame.columns:
        labels = [
            _parse_label(v.strip(), i + 2) for i, v in enumerate(frame[LABEL_COLUMN])
        ]

    fm = FeatureMatrix(values, np.isnan(values), feature_names, tuple(ids))
    dataset = Dataset.from_matrix(fm, labels)
    logger.debug("Loaded tabular data", path=str(path), n=dataset.n, m=dataset.m)
    return dataset


def _format_number(value: float) -> str:
    return repr(float(value))


def write_tabular(dataset: Dataset, path: Path) -> None:
    """Writes a dataset as CSV. Missing cells are left empty."""
    columns: dict[str, list[str]] = {
        STUDENT_ID_COLUMN: list(dataset.student_ids)
    }
    for name in dataset.feature_names:
        columns[name] = [
            "" if (v := r.features[name]) is None else _format_number(v)
            for r in dataset.records
        ]
    if any(r.label is not None for r in dataset.records):
        columns[LABEL_COLUMN] = [
            "" if r.label is None else str(r.label) for r in dataset.records
        ]
    pd.DataFrame(columns, dtype=str).to_csv(
        path, index=False, encoding="utf-8", lineterminator="\n"
    )


def load_comments(path: Path) -> CommentSet:
    """Loads comments from a JSON Lines file.

    Each line is an object with ``student_id``, ``timestamp`` (ISO 8601),
    ``text`` and, optionally, ``gold_label``. Blank lines are skipped.

    Raises:
        MalformedJsonError: If a line is not a valid comment object.
        BadTimestampError: If a timestamp can't be parsed.
        EmptyTextError: If a text is empty after trimming.
    """
    comments: list[Comment] = []
    with open(path, encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedJsonError(line_number, str(exc)) from None
            if not isinstance(obj, dict):
                raise MalformedJsonError(line_number, "not an object")
            for key in ("student_id", "timestamp", "text"):
                if key not in obj:
                    raise MalformedJsonError(line_number, f"missing key '{key}'")

            try:
                timestamp = parse_iso_datetime(str(obj["timestamp"]))
            except ValueError:
                raise BadTimestampError(line_number, repr(obj["timestamp"])) from None

            text = obj["text"]
            if not isinstance(text, str) or not text.strip():
                raise EmptyTextError(line_number)

            gold_label = None
            if (gold := obj.get("gold_label")) is not None:
                try:
                    gold_label = SentimentClass(gold)
                except ValueError:
                    raise MalformedJsonError(
                        line_number, f"unknown gold_label {gold!r}"
                    ) from None

            comments.append(
                Comment(str(obj["student_id"]), timestamp, text, gold_label)
            )

    logger.debug("Loaded comments", path=str(path), size=len(comments))
    return CommentSet(comments)


def write_comments(comments: Iterable[Comment], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for comment in comments:
            f.write(json.dumps(comment.to_dict(), ensure_ascii=False) + "\n")


def validate(dataset: Dataset, comments: CommentSet) -> ValidationReport:
    """Reports orphan comments, per-feature missing rates and label balance."""
    known = set(dataset.student_ids)
    orphans = tuple(sid for sid in comments.student_ids if sid not in known)

    fm = dataset.matrix
    if dataset.n:
        rates = fm.missing_mask.mean(axis=0)
    else:
        rates = np.zeros(dataset.m)
    missing_rates = {name: float(rate) for name, rate in zip(dataset.feature_names, rates)}

    labels = [r.label for r in dataset.records if r.label is not None]
    positive_rate = sum(labels) / len(labels) if labels else None

    warnings = []
    if orphans:
        warnings.append(f"{len(orphans)} commenting student(s) absent from the dataset")
    for name, rate in missing_rates.items():
        if rate == 1.0:
            warnings.append(f"Feature '{name}' has no observed values")
    if len(labels) < dataset.n:
        warnings.append(f"{dataset.n - len(labels)} record(s) have no label")

    return ValidationReport(
        n_records=dataset.n,
        n_features=dataset.m,
        n_comments=len(comments),
        orphan_student_ids=orphans,
        missing_rates=missing_rates,
        n_labeled=len(labels),
        positive_rate=positive_rate,
        warnings=tuple(warnings),
    )
