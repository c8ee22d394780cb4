"""Feature cleaning: mean imputation, z-score outliers, scaling and correlation."""

from dataclasses import dataclass
from enum import auto, StrEnum
from typing import Any, Self

import numpy as np
import structlog

from sentidrop.core_data import FeatureMatrix
from sentidrop.errors import (
    AllMissingFeatureError,
    InvalidThresholdError,
)
from sentidrop.types import BoolMatrix, FloatMatrix

logger = structlog.get_logger(__name__)

DEFAULT_OUTLIER_THRESHOLD = 3.0


class ScalingMethod(StrEnum):
    ZSCORE = auto()
    MINMAX = auto()
    NONE = auto()


class OutlierTreatment(StrEnum):
    """What to do with flagged training rows."""

    REPORT = auto()
    REMOVE = auto()


def _check_columns(fm: FeatureMatrix, names: tuple[str, ...]) -> None:
    if fm.column_names != names:
        raise ValueError(
            f"Columns {list(fm.column_names)} do not match fitted {list(names)}"
        )


@dataclass(frozen=True)
class ImputationLog:
    """Per-feature fill values and counts of an imputation pass."""

    column_names: tuple[str, ...]
    fill_values: tuple[float, ...]
    fill_counts: tuple[int, ...]

    def apply(self, fm: FeatureMatrix) -> FeatureMatrix:
        """Fills missing cells of (unseen) data with the recorded values."""
        _check_columns(fm, self.column_names)
        values = np.where(fm.missing_mask, np.asarray(self.fill_values), fm.values)
        return fm.with_values(values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "column_names": list(self.column_names),
            "fill_values": list(self.fill_values),
            "fill_counts": list(self.fill_counts),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(
            tuple(d["column_names"]),
            tuple(float(v) for v in d["fill_values"]),
            tuple(int(n) for n in d["fill_counts"]),
        )


@dataclass(frozen=True)
class ScalerParams:
    """Parameters of a fitted scaling transform.

    Constant features (zero spread) are listed in ``passthrough`` and left
    unscaled; their stored deviation and range are set to 1.
    """

    method: ScalingMethod
    column_names: tuple[str, ...]
    means: tuple[float, ...]
    #: Population standard deviations.
    stds: tuple[float, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    passthrough: tuple[str, ...] = ()

    def _shift_and_scale(self) -> tuple[np.ndarray, np.ndarray]:
        m = len(self.column_names)
        match self.method:
            case ScalingMethod.ZSCORE:
                shift, scale = np.array(self.means), np.array(self.stds)
            case ScalingMethod.MINMAX:
                shift = np.array(self.mins)
                scale = np.array(self.maxs) - shift
            case _:
                shift, scale = np.zeros(m), np.ones(m)
        constant = np.array([name in self.passthrough for name in self.column_names], bool)
        shift = np.where(constant, 0.0, shift)
        scale = np.where(constant, 1.0, scale)
        return shift, scale

    def apply(self, fm: FeatureMatrix) -> FeatureMatrix:
        _check_columns(fm, self.column_names)
        shift, scale = self._shift_and_scale()
        return fm.with_values((fm.require_imputed() - shift) / scale)

    def invert(self, fm: FeatureMatrix) -> FeatureMatrix:
        _check_columns(fm, self.column_names)
        shift, scale = self._shift_and_scale()
        return fm.with_values(fm.require_imputed() * scale + shift)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": str(self.method),
            "column_names": list(self.column_names),
            "means": list(self.means),
            "stds": list(self.stds),
            "mins": list(self.mins),
            "maxs": list(self.maxs),
            "passthrough": list(self.passthrough),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(
            method=ScalingMethod(d["method"]),
            column_names=tuple(d["column_names"]),
            means=tuple(d["means"]),
            stds=tuple(d["stds"]),
            mins=tuple(d["mins"]),
            maxs=tuple(d["maxs"]),
            passthrough=tuple(d["passthrough"]),
        )


def impute_mean(fm: FeatureMatrix) -> tuple[FeatureMatrix, ImputationLog]:
    """Replaces missing cells with the mean of observed cells per feature.

    Raises:
        AllMissingFeatureError: If a feature has no observed values.
    """
    observed = ~fm.missing_mask
    counts = observed.sum(axis=0)
    if fm.n_rows and (empty := np.flatnonzero(counts == 0)).size:
        raise AllMissingFeatureError(fm.column_names[empty[0]])

    sums = np.where(observed, fm.values, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)

    log = ImputationLog(
        column_names=fm.column_names,
        fill_values=tuple(float(v) for v in means),
        fill_counts=tuple(int(c) for c in fm.missing_mask.sum(axis=0)),
    )
    logger.debug("Imputed missing cells", filled=int(sum(log.fill_counts)))
    return log.apply(fm), log


def _population_stats(values: FloatMatrix) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = np.sqrt(((values - mean) ** 2).mean(axis=0))
    return mean, std


def flag_outliers(
    fm: FeatureMatrix, threshold: float = DEFAULT_OUTLIER_THRESHOLD
) -> BoolMatrix:
    """Flags cells whose population z-score exceeds a threshold.

    Constant columns never flag.

    Raises:
        InvalidThresholdError: If the threshold is not positive.
        NotImputedError: If the matrix has missing cells.
    """
    if not threshold > 0:
        raise InvalidThresholdError(f"Outlier threshold must be positive, got {threshold}")
    values = fm.require_imputed()
    if fm.n_rows == 0:
        return np.zeros(fm.shape, dtype=bool)
    mean, std = _population_stats(values)
    safe_std = np.where(std > 0, std, 1.0)
    z = np.abs(values - mean) / safe_std
    return (z > threshold) & (std > 0)


def outlier_summary(flags: BoolMatrix, column_names: tuple[str, ...]) -> dict[str, int]:
    """Counts flagged cells per feature."""
    return {name: int(count) for name, count in zip(column_names, flags.sum(axis=0))}


def normalize(
    fm: FeatureMatrix, method: ScalingMethod = ScalingMethod.ZSCORE
) -> tuple[FeatureMatrix, ScalerParams]:
    """Fits a scaling transform on ``fm`` and applies it.

    The output is produced by :meth:`ScalerParams.apply`, so re-applying the
    returned params to the same matrix gives identical values.
    """
    method = ScalingMethod(method)
    values = fm.require_imputed()
    if fm.n_rows:
        mean, std = _population_stats(values)
        lo, hi = values.min(axis=0), values.max(axis=0)
    else:
        mean = lo = np.zeros(fm.n_columns)
        std = hi = np.ones(fm.n_columns)

    if method is ScalingMethod.NONE:
        constant = ()
    else:
        constant = tuple(
            name
            for name, s, a, b in zip(fm.column_names, std, lo, hi)
            if not s > 0 or a == b
        )

    params = ScalerParams(
        method=method,
        column_names=fm.column_names,
        means=tuple(float(v) for v in mean),
        stds=tuple(float(s) if s > 0 else 1.0 for s in std),
        mins=tuple(float(v) for v in lo),
        maxs=tuple(float(b) if b > a else float(a) + 1.0 for a, b in zip(lo, hi)),
        passthrough=constant,
    )
    if constant:
        logger.debug("Constant features pass through unscaled", features=constant)
    return params.apply(fm), params


def correlation_matrix(
    fm: FeatureMatrix, label: np.ndarray | None = None
) -> tuple[FloatMatrix, tuple[str, ...]]:
    """Computes the Pearson correlation matrix of features.

    Args:
        fm: A fully imputed feature matrix.
        label: An optional column (e.g. dropout labels) appended as ``label``.

    Returns:
        A tuple of the symmetric matrix and its column names. Correlation with
        a constant column is 0; the diagonal is 1.
    """
    values = fm.require_imputed()
    names = fm.column_names
    if label is not None:
        values = np.column_stack([values, np.asarray(label, dtype=np.float64)])
        names = names + ("label",)

    centered = values - values.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    constant = ~(norms > 0)
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe
    corr = np.clip(unit.T @ unit, -1.0, 1.0)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr, names


__all__ = (
    "ImputationLog",
    "OutlierTreatment",
    "ScalerParams",
    "ScalingMethod",
    "correlation_matrix",
    "flag_outliers",
    "impute_mean",
    "normalize",
    "outlier_summary",
)
