from __future__ import annotations

from collections.abc import Sequence


class SentidropError(Exception):
    """Base Sentidrop exception."""

    #: Name of the package module the error belongs to.
    module: str = "sentidrop"

    @property
    def code(self) -> str:
        """Machine-readable error code, e.g. 'DuplicateStudentId'."""
        return type(self).__name__.removesuffix("Error")

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "module": self.module, "message": str(self)}


# Data loading


class DataError(SentidropError):
    module = "core_data"


class MissingColumnError(DataError):
    """Raised when a required column is absent from a CSV header."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Required column is missing: '{column}'")


class DuplicateStudentIdError(DataError):
    def __init__(self, student_id: str):
        self.student_id = student_id
        super().__init__(f"Duplicate student ID: '{student_id}'")


class NonNumericCellError(DataError):
    """Raised when a feature cell can't be coerced to a number."""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Non-numeric value in row {row}, column '{column}': {value!r}")


class SchemaMismatchError(DataError):
    def __init__(self, expected: Sequence[str], got: Sequence[str]):
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(f"Columns {list(got)} do not match schema {list(expected)}")


class CommentLineError(DataError):
    """Failed to parse a line of a comments file."""

    reason: str = "Malformed line"

    def __init__(self, line: int, detail: str = ""):
        self.line = line
        message = f"{self.reason} at line {line}"
        super().__init__(f"{message}: {detail}" if detail else message)


class BadTimestampError(CommentLineError):
    reason = "Bad timestamp"


class EmptyTextError(CommentLineError):
    reason = "Empty comment text"


class MalformedJsonError(CommentLineError):
    reason = "Malformed JSON"


class InvalidDatasetError(DataError):
    """Raised when a dataset violates its structural invariants."""


# Preprocessing


class PreprocessError(SentidropError):
    module = "preprocess"


class AllMissingFeatureError(PreprocessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Feature has no observed values: '{name}'")


class NotImputedError(PreprocessError):
    def __str__(self) -> str:
        return "Feature matrix has missing cells, impute it first"


class InvalidThresholdError(PreprocessError):
    pass


# Sentiment


class SentimentError(SentidropError):
    module = "sentiment"


class MissingClassError(SentimentError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"No training examples of class '{label}'")


class ZeroVarianceError(SentimentError):
    """Raised when differences have zero spread but a non-null mean."""


class DegenerateSampleError(SentimentError):
    """Raised when there are too few differences to test."""


class ScoreRangeError(SentimentError):
    pass


# Models


class ModelError(SentidropError):
    module = "models"


class SingleClassTrainingError(ModelError):
    def __str__(self) -> str:
        return "Training labels must contain both classes"


class FeatureMismatchError(ModelError):
    def __init__(self, expected: Sequence[str], got: Sequence[str]):
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(
            f"Feature columns {list(got)} do not match model features {list(expected)}"
        )


class UnknownFormatVersionError(ModelError):
    """Raised when loading a serialized file with an unsupported version."""


# Ensemble


class EnsembleError(SentidropError):
    module = "ensemble"


class OutOfRangeError(EnsembleError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"Probability out of [0, 1]: {value}")


class UnknownStudentError(EnsembleError):
    def __init__(self, student_id: str):
        self.student_id = student_id
        super().__init__(f"Student has no dropout-detection row: '{student_id}'")


# Explanations


class ExplainError(SentidropError):
    module = "explain"


class TooManyFeaturesError(ExplainError):
    def __init__(self, m: int, limit: int):
        self.m = m
        super().__init__(f"Exact enumeration is limited to {limit} features, got {m}")


class EmptyBackgroundError(ExplainError):
    def __str__(self) -> str:
        return "Background set is empty"


class EmptyInputError(ExplainError):
    def __str__(self) -> str:
        return "No explanations to rank"


class BadKError(ExplainError):
    def __init__(self, k: int, m: int):
        self.k = k
        super().__init__(f"k must be within [1, {m}], got {k}")


# Evaluation


class EvaluationError(SentidropError):
    module = "eval"


class LengthMismatchError(EvaluationError):
    def __init__(self, *lengths: int):
        self.lengths = lengths
        super().__init__(f"Lengths do not match: {', '.join(map(str, lengths))}")


class TooFewGroupsError(EvaluationError):
    def __init__(self, n_groups: int, k: int):
        self.n_groups = n_groups
        self.k = k
        super().__init__(f"Cannot split {n_groups} groups into {k} folds")


class EmptyGridError(EvaluationError):
    def __str__(self) -> str:
        return "Hyper-parameter grid is empty"


# Synthetic data


class SynthError(SentidropError):
    module = "synth"


class BadConfigError(SynthError):
    pass


# Command line


class CliError(SentidropError):
    module = "cli"


class ConfigError(CliError):
    """Raised for an invalid or inconsistent pipeline configuration."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class IoError(CliError):
    pass


class MissingArtifactsError(CliError):
    def __init__(self, run_directory: str):
        self.run_directory = run_directory
        super().__init__(f"No run manifests found in '{run_directory}'")
