from pathlib import Path

import numpy as np
import pytest

from sentidrop.core_data import (
    CommentSet,
    Dataset,
    FeatureMatrix,
    load_comments,
    load_tabular,
    StudentRecord,
    validate,
    write_comments,
    write_tabular,
)
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
from sentidrop.types import SentimentClass

from tests.helpers import make_comment


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadTabular:
    def test_missing_cells_and_labels(self, tmp_path: Path):
        path = write_text(
            tmp_path / "students.csv",
            "student_id,minutes,days,label\nS1,10,1,1\nS2,,2.5,0\nS3,7,,\n",
        )
        dataset = load_tabular(path)
        assert dataset.student_ids == ("S1", "S2", "S3")
        assert dataset.feature_names == ("minutes", "days")
        assert dataset.records[1].features == {"minutes": None, "days": 2.5}
        assert dataset.records[2].label is None
        assert dataset.matrix.missing_mask.tolist() == [
            [False, False],
            [True, False],
            [False, True],
        ]

    def test_missing_student_id_column(self, tmp_path: Path):
        path = write_text(tmp_path / "students.csv", "id,minutes\nS1,1\n")
        with pytest.raises(MissingColumnError) as exc_info:
            load_tabular(path)
        assert exc_info.value.column == "student_id"

    def test_duplicate_student_id(self, tmp_path: Path):
        path = write_text(tmp_path / "students.csv", "student_id,x\nS1,1\nS1,2\n")
        with pytest.raises(DuplicateStudentIdError):
            load_tabular(path)

    def test_non_numeric_cell_reports_file_line(self, tmp_path: Path):
        path = write_text(
            tmp_path / "students.csv", "student_id,x,y\nS1,1,2\nS2,3,abc\n"
        )
        with pytest.raises(NonNumericCellError) as exc_info:
            load_tabular(path)
        assert exc_info.value.row == 3
        assert exc_info.value.column == "y"
        assert exc_info.value.value == "abc"

    def test_schema_mismatch(self, tmp_path: Path):
        path = write_text(tmp_path / "students.csv", "student_id,x,y\nS1,1,2\n")
        with pytest.raises(SchemaMismatchError):
            load_tabular(path, schema=("y", "x"))

    def test_write_then_load_keeps_missing_cells(self, tmp_path: Path, toy_dataset):
        path = tmp_path / "students.csv"
        write_tabular(toy_dataset, path)
        assert load_tabular(path).equals(toy_dataset)


class TestLoadComments:
    def test_blank_lines_skipped(self, tmp_path: Path):
        path = write_text(
            tmp_path / "comments.jsonl",
            '{"student_id": "S1", "timestamp": "2024-09-02T10:00:00+02:00", "text": "Hi"}\n'
            "\n"
            '{"student_id": "S0", "timestamp": "2024-09-01T00:00:00Z", "text": "Ok",'
            ' "gold_label": "neutral"}\n',
        )
        comments = load_comments(path)
        assert len(comments) == 2
        assert comments[0].student_id == "S0"
        assert comments[0].gold_label is SentimentClass.NEUTRAL
        assert comments[1].timestamp.hour == 8

    @pytest.mark.parametrize(
        "line,error",
        [
            ("not json", MalformedJsonError),
            ('{"student_id": "S1", "text": "x"}', MalformedJsonError),
            ('{"student_id": "S1", "timestamp": "yesterday", "text": "x"}', BadTimestampError),
            ('{"student_id": "S1", "timestamp": "2024-09-01T00:00:00Z", "text": "  "}', EmptyTextError),
        ],
    )
    def test_line_errors(self, tmp_path: Path, line: str, error: type):
        valid = '{"student_id": "S1", "timestamp": "2024-09-01T00:00:00Z", "text": "a"}'
        path = write_text(tmp_path / "comments.jsonl", f"{valid}\n{line}\n")
        with pytest.raises(error) as exc_info:
            load_comments(path)
        assert exc_info.value.line == 2

    def test_write_then_load(self, tmp_path: Path, toy_comments):
        path = tmp_path / "comments.jsonl"
        write_comments(toy_comments, path)
        assert load_comments(path) == toy_comments


def test_comment_set_is_sorted_by_student_and_time():
    comments = CommentSet(
        [
            make_comment("S2", "2024-09-01T00:00:00Z", "b"),
            make_comment("S1", "2024-10-01T00:00:00Z", "c"),
            make_comment("S1", "2024-09-01T00:00:00Z", "a"),
        ]
    )
    assert [c.text for c in comments] == ["a", "c", "b"]
    assert comments.student_ids == ("S1", "S2")
    assert list(comments.by_student()) == ["S1", "S2"]


def test_label_must_be_binary():
    with pytest.raises(InvalidDatasetError):
        StudentRecord("S1", {"x": 1.0}, label=2)


def test_dataset_rejects_duplicate_ids():
    records = (StudentRecord("S1", {"x": 1.0}), StudentRecord("S1", {"x": 2.0}))
    with pytest.raises(DuplicateStudentIdError):
        Dataset(records, ("x",))


def test_feature_matrix_require_imputed():
    fm = FeatureMatrix.from_array([[1.0, np.nan], [2.0, 3.0]], ("a", "b"))
    assert not fm.is_imputed
    with pytest.raises(NotImputedError):
        fm.require_imputed()
    assert fm.select_columns(["a"]).require_imputed().tolist() == [[1.0], [2.0]]


def test_validate_reports_orphans_and_missing_rates(toy_dataset, toy_comments):
    comments = CommentSet(
        [*toy_comments, make_comment("S9", "2024-09-05T00:00:00Z", "Who am I?")]
    )
    report = validate(toy_dataset, comments)
    assert report.orphan_student_ids == ("S9",)
    assert report.missing_rates == {"minutes": 0.25, "days": 0.25}
    assert report.n_labeled == 4
    assert report.positive_rate == 0.5
    assert "1 commenting student(s) absent from the dataset" in report.warnings
