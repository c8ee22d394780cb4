"""Reusable command-line options.

Options that override configuration values carry their dotted config
address in :data:`CONFIG_ADDRESSES`; an unset option leaves the value of the
configuration file (or the default) in place.
"""

from pathlib import Path

import click
import cloup
from cloup.constraints import constraint, mutually_exclusive

from sentidrop.explain import ShapMode
from sentidrop.preprocess import OutlierTreatment, ScalingMethod
from sentidrop.synth import PRESETS
from sentidrop.types import ModelFamily

#: Option name to the configuration value it overrides.
CONFIG_ADDRESSES: dict[str, str] = {
    "seed": "seed",
    "threads": "threads",
    "output_dir": "paths.output",
    "tabular": "paths.tabular",
    "comments": "paths.comments",
    "scorer": "paths.scorer",
    "scores": "paths.scores",
    "model_path": "paths.model",
    "model": "model.name",
    "sentiment": "sentiment.enabled",
    "scaling": "preprocess.scaling",
    "outliers": "preprocess.outliers",
    "folds": "cv.k",
    "family": "grid.family",
    "top_k": "selection.top_k",
    "mode": "explain.mode",
    "rows": "explain.rows",
    "preset": "synth.preset",
    "students": "synth.n_students",
}

SEED_TYPE = click.IntRange(0, 2**64 - 1)


def _path_option(*flags: str, **kwargs) -> cloup.Option:
    return cloup.option(*flags, type=click.Path(path_type=Path), **kwargs)


def run_options(f):
    """Configuration file, seed, worker count and output directory."""
    f = cloup.option_group(
        "Run options",
        _path_option(
            "-C",
            "--config",
            "config_path",
            help="Specifies a path to a configuration file (JSON or TOML).",
        ),
        cloup.option(
            "--no-config",
            help="Do not load the default configuration file.",
            default=False,
            is_flag=True,
        ),
        cloup.option(
            "--seed",
            type=SEED_TYPE,
            help="Root seed; all randomness derives from it.",
        ),
        cloup.option(
            "--threads",
            type=click.IntRange(min=1),
            help="Maximum number of parallel workers. Results do not depend on it.",
        ),
        _path_option("-o", "--out", "output_dir", help="Run directory for artifacts."),
    )(f)
    f = constraint(mutually_exclusive, ["config_path", "no_config"])(f)
    return f


def input_options(f):
    return cloup.option_group(
        "Input options",
        _path_option("--tabular", help="Student records (CSV)."),
        _path_option("--comments", help="Student comments (JSON Lines)."),
        _path_option("--scorer", help="A trained sentiment scorer (JSON)."),
        _path_option("--scores", help="Externally computed scores (JSON Lines)."),
    )(f)


model_path_option = _path_option(
    "-m",
    "--model-path",
    "model_path",
    help="A fitted pipeline (JSON). Defaults to the one in the run directory.",
)


model_option = cloup.option(
    "--model",
    type=click.Choice(["ensemble", *[str(f) for f in ModelFamily]]),
    help="Model to fit.",
)

sentiment_option = cloup.option(
    "--sentiment/--no-sentiment",
    default=None,
    help="Whether to add the sentiment feature block.",
)

folds_option = cloup.option(
    "-k",
    "--folds",
    type=click.IntRange(min=2),
    help="Number of group folds.",
)


scaling_option = cloup.option(
    "--scaling",
    type=click.Choice([str(m) for m in ScalingMethod]),
    help="Feature scaling.",
)

outliers_option = cloup.option(
    "--outliers",
    type=click.Choice([str(t) for t in OutlierTreatment]),
    help="Whether flagged rows are only reported or removed before training.",
)

family_option = cloup.option(
    "--family",
    type=click.Choice([str(f) for f in ModelFamily]),
    help="Model family to tune.",
)

top_k_option = cloup.option(
    "-k",
    "--top-k",
    type=click.IntRange(min=1),
    help="Number of features to keep.",
)

mode_option = cloup.option(
    "--mode",
    type=click.Choice([str(m) for m in ShapMode]),
    help="Exact enumeration or permutation sampling.",
)

rows_option = cloup.option(
    "--rows",
    type=click.IntRange(min=1),
    help="Number of students to explain, drawn stratified by label.",
)

preset_option = cloup.option(
    "--preset",
    type=click.Choice(list(PRESETS)),
    help="Generator preset.",
)

students_option = cloup.option(
    "-n",
    "--students",
    type=click.IntRange(min=1),
    help="Number of students to generate.",
)

logging_options = click.option(
    "--debug",
    "debug",
    help="Enable verbose output for debugging.",
    is_flag=True,
    is_eager=True,
)
