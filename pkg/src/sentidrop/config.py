"""Layered run configuration.

Defaults live in :data:`DEFAULT_CONFIG`. Configuration files (JSON, or TOML
by extension) and command-line flags are stacked on top of them with
:class:`AddressableChainMap`; the first map holding a key wins, so flags
beat files and files beat defaults.
"""

import json
import operator
import tomllib
from collections import ChainMap
from collections.abc import Hashable, Mapping, MutableMapping
from copy import deepcopy
from dataclasses import dataclass
from datetime import date
from functools import reduce
from pathlib import Path
from typing import Any, Self

from sentidrop.artifacts import config_hash
from sentidrop.errors import ConfigError, SentidropError
from sentidrop.evaluation.ablation import ABLATION_MODELS
from sentidrop.evaluation.folds import DEFAULT_FOLDS
from sentidrop.explain import DEFAULT_BACKGROUND_SIZE, ShapMode
from sentidrop.pipeline import ENSEMBLE, PipelineSettings, SentimentSource


class AddressableMixin:
    def traverse(self, address: str, default: Any = None, delimiter: str = ".") -> Any:
        """Traverse nested dictionary to access a value by an address."""
        try:
            keys = address.split(delimiter)
            return reduce(operator.getitem, keys, self)
        except KeyError:
            return default


class AddressableDict(dict, AddressableMixin):
    """A dictionary that allows to use an address to access a nested value."""


class DeepChainMap(ChainMap):
    """A ChainMap that works on nested dictionaries."""

    def __getitem__(self, key: Hashable) -> Any:
        if not isinstance(value := super().__getitem__(key), Mapping):
            return value

        values: list[dict] = []
        for mapping in self.maps:
            try:
                if isinstance(nested := mapping[key], Mapping):
                    values.append(nested)
            except KeyError:
                pass

        if values:
            return self.__class__(*values)

        return self.__missing__(key)


class AddressableChainMap(DeepChainMap, AddressableMixin):
    """A ChainMap that allows to use an address to access a nested value."""


DEFAULT_CONFIG = AddressableDict(
    {
        "version": 1,
        "seed": 0,
        "threads": 1,
        "paths": {
            "tabular": None,
            "comments": None,
            "scorer": None,
            "scores": None,
            "model": None,
            "output": "sentidrop-run",
        },
        "preprocess": {
            "scaling": "zscore",
            "outlier_threshold": 3.0,
            "outliers": "report",
            "exclude_columns": [],
            "engagement_column": "weekly_minutes",
        },
        "sentiment": {
            "enabled": True,
            "source": "train",
            "threshold": 0.2,
            "term_start": "2024-09-01",
            "include_shift": False,
            "scorer": {
                "lowercase": True,
                "ngram_range": [1, 2],
                "c": 1.0,
                "max_iter": 1000,
                "holdout_fraction": 0.2,
            },
        },
        "model": {
            "name": ENSEMBLE,
            "fusion": "feature",
            "decision_threshold": 0.5,
            "hyperparameters": {},
        },
        "selection": {
            "top_k": None,
            "background_size": DEFAULT_BACKGROUND_SIZE,
            "n_permutations": 20,
            "rows": 200,
        },
        "explain": {
            "mode": "sampling",
            "n_permutations": 100,
            "background_size": DEFAULT_BACKGROUND_SIZE,
            "rows": 200,
        },
        "cv": {
            "strategy": "group_kfold",
            "k": DEFAULT_FOLDS,
            "year_column": None,
            "test_year": None,
        },
        "grid": {
            "family": "gbdt",
            "params": {
                "max_depth": [2, 3, 4],
                "learning_rate": [0.05, 0.1, 0.3],
                "n_rounds": [50, 100],
            },
        },
        "ablation": {
            "models": list(ABLATION_MODELS),
            "noise_control": True,
        },
        "synth": {
            "preset": "default",
        },
    }
)

CV_STRATEGIES = ("group_kfold", "year_holdout")


def load_config_from_file(path: Path) -> dict:
    """Loads a JSON or (by ``.toml`` extension) TOML configuration file.

    Raises:
        ConfigError: If the file can't be parsed.
    """
    try:
        if path.suffix == ".toml":
            with path.open("rb") as f:
                return tomllib.load(f)
        with path.open(encoding="utf-8") as f:
            return json.load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot parse '{path}': {exc}") from None


def update_nested_dict(base: MutableMapping, updates: MutableMapping) -> MutableMapping:
    """Update a base nested dict with values from updates. The new, update
    dictionary will be returned.
    """
    updated_dict = deepcopy(base)
    for key, value in updates.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), Mapping):
            updated_dict[key] = update_nested_dict(base[key], value)
        else:
            updated_dict[key] = value
    return updated_dict


def to_plain_dict(mapping: Mapping) -> dict:
    """Resolves a (chained) mapping into nested plain dictionaries."""
    return {
        key: to_plain_dict(value) if isinstance(value, Mapping) else value
        for key, value in ((key, mapping[key]) for key in sorted(mapping))
    }


def _optional_path(value: Any) -> Path | None:
    return Path(value) if value else None


@dataclass(frozen=True)
class CVSettings:
    strategy: str = "group_kfold"
    k: int = DEFAULT_FOLDS
    year_column: str | None = None
    test_year: int | None = None

    def __post_init__(self):
        if self.strategy not in CV_STRATEGIES:
            raise ConfigError(
                "cv.strategy", f"choose exactly one of: {', '.join(CV_STRATEGIES)}"
            )
        if self.strategy == "group_kfold" and self.k < 2:
            raise ConfigError("cv.k", "at least 2 folds are required")
        if self.strategy == "year_holdout" and (
            self.year_column is None or self.test_year is None
        ):
            raise ConfigError(
                "cv.year_column", "year holdout needs year_column and test_year"
            )


@dataclass(frozen=True)
class ExplainSettings:
    mode: ShapMode = ShapMode.SAMPLING
    n_permutations: int = 100
    background_size: int = DEFAULT_BACKGROUND_SIZE
    #: Explained rows, drawn stratified; all rows when None.
    rows: int | None = 200


@dataclass(frozen=True)
class PipelineConfig:
    """Validated configuration of one run."""

    tabular: Path | None
    comments: Path | None
    scorer_path: Path | None
    scores_path: Path | None
    model_path: Path | None
    output_dir: Path
    settings: PipelineSettings
    cv: CVSettings
    explain: ExplainSettings
    grid_family: str
    grid: dict[str, list[Any]]
    ablation_models: tuple[str, ...]
    noise_control: bool
    engagement_column: str | None
    synth: dict[str, Any]
    seed: int
    threads: int
    #: The resolved configuration mapping.
    raw: dict[str, Any]

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> Self:
        """Builds a configuration from a (layered) mapping with all sections.

        Raises:
            ConfigError: If a value is invalid.
        """
        raw = to_plain_dict(mapping)
        config = AddressableDict(raw)
        try:
            cv = CVSettings(
                strategy=config.traverse("cv.strategy"),
                k=int(config.traverse("cv.k")),
                year_column=config.traverse("cv.year_column"),
                test_year=(
                    int(year)
                    if (year := config.traverse("cv.test_year")) is not None
                    else None
                ),
            )
            exclude = list(config.traverse("preprocess.exclude_columns") or [])
            if cv.strategy == "year_holdout" and cv.year_column not in exclude:
                exclude.append(cv.year_column)

            top_k = config.traverse("selection.top_k")
            settings = PipelineSettings.from_dict(
                {
                    "model": config.traverse("model.name"),
                    "scaling": config.traverse("preprocess.scaling"),
                    "outlier_threshold": float(config.traverse("preprocess.outlier_threshold")),
                    "outlier_treatment": config.traverse("preprocess.outliers"),
                    "use_sentiment": bool(config.traverse("sentiment.enabled")),
                    "sentiment_source": config.traverse("sentiment.source"),
                    "scorer_config": config.traverse("sentiment.scorer"),
                    "class_threshold": float(config.traverse("sentiment.threshold")),
                    "term_start": str(config.traverse("sentiment.term_start")),
                    "include_shift": bool(config.traverse("sentiment.include_shift")),
                    "fusion": config.traverse("model.fusion"),
                    "hyperparameters": config.traverse("model.hyperparameters") or {},
                    "top_k": int(top_k) if top_k is not None else None,
                    "background_size": int(config.traverse("selection.background_size")),
                    "selection_rows": int(config.traverse("selection.rows")),
                    "n_permutations": int(config.traverse("selection.n_permutations")),
                    "exclude_columns": exclude,
                    "decision_threshold": float(config.traverse("model.decision_threshold")),
                }
            )
            explain_rows = config.traverse("explain.rows")
            explain = ExplainSettings(
                mode=ShapMode(config.traverse("explain.mode")),
                n_permutations=int(config.traverse("explain.n_permutations")),
                background_size=int(config.traverse("explain.background_size")),
                rows=int(explain_rows) if explain_rows is not None else None,
            )
        except SentidropError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError("config", str(exc)) from None

        return cls(
            tabular=_optional_path(config.traverse("paths.tabular")),
            comments=_optional_path(config.traverse("paths.comments")),
            scorer_path=_optional_path(config.traverse("paths.scorer")),
            scores_path=_optional_path(config.traverse("paths.scores")),
            model_path=_optional_path(config.traverse("paths.model")),
            output_dir=Path(config.traverse("paths.output")),
            settings=settings,
            cv=cv,
            explain=explain,
            grid_family=str(config.traverse("grid.family")),
            grid={k: list(v) for k, v in (config.traverse("grid.params") or {}).items()},
            ablation_models=tuple(config.traverse("ablation.models")),
            noise_control=bool(config.traverse("ablation.noise_control")),
            engagement_column=config.traverse("preprocess.engagement_column"),
            synth=dict(config.traverse("synth") or {}),
            seed=int(config.traverse("seed")),
            threads=int(config.traverse("threads")),
            raw=raw,
        )

    @property
    def canonical(self) -> dict[str, Any]:
        """The configuration without options that can't change results."""
        output = deepcopy(self.raw)
        output.pop("threads", None)
        output.get("paths", {}).pop("output", None)
        return output

    @property
    def hash(self) -> str:
        return config_hash(self.canonical)

    @property
    def uses_comments(self) -> bool:
        return self.settings.use_sentiment and self.settings.sentiment_source in (
            SentimentSource.TRAIN,
            SentimentSource.SCORER,
        )

    @property
    def term_start(self) -> date:
        return self.settings.term_start

    def require_path(self, field: str) -> Path:
        """Gets a path option that must point to an existing file.

        Raises:
            ConfigError: If the option is unset or the file does not exist.
        """
        attribute = {
            "paths.tabular": "tabular",
            "paths.comments": "comments",
            "paths.scorer": "scorer_path",
            "paths.scores": "scores_path",
            "paths.model": "model_path",
        }[field]
        path = getattr(self, attribute)
        if path is None:
            raise ConfigError(field, "a path is required")
        if not path.exists():
            raise ConfigError(field, f"file does not exist: '{path}'")
        return path


def build_config(*layers: Mapping) -> PipelineConfig:
    """Stacks layers (highest precedence first) over the defaults."""
    return PipelineConfig.from_mapping(
        AddressableChainMap(*[layer for layer in layers if layer], DEFAULT_CONFIG)
    )
