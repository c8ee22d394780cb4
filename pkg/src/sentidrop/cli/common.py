import os
import sys
from pathlib import Path
from typing import Any

import click
import structlog
from rich import box
from rich.console import Console
from rich.table import Table

from sentidrop.actions.common import StageResult
from sentidrop.cli.config import load_layered_config
from sentidrop.cli.options import CONFIG_ADDRESSES
from sentidrop.config import PipelineConfig
from sentidrop.evaluation import METRIC_NAMES
from sentidrop.progress import NullProgressReporter, ProgressReporter, RichProgressReporter

logger = structlog.get_logger(__name__)

CONSOLE_TEXT_WIDTH = 80


def suppress_output() -> None:
    sys.stdout = open(os.devnull, "w")


def echo_notice(message: str) -> None:
    click.echo(f"~ {message}")


def load_run_config(options: dict[str, Any]) -> PipelineConfig:
    """Builds the configuration of a command from its parsed options."""
    flags = {}
    for name, value in options.items():
        if name in CONFIG_ADDRESSES:
            flags[CONFIG_ADDRESSES[name]] = str(value) if isinstance(value, Path) else value
    return load_layered_config(
        options.get("config_path"), options.get("no_config", False), flags
    )


def create_progress_reporter(ctx: click.Context) -> ProgressReporter:
    if ctx.obj.quiet:
        return NullProgressReporter()
    return RichProgressReporter()


def print_metrics_table(
    aggregate: dict[str, dict[str, dict[str, float]]], title: str | None = None
) -> None:
    """Prints the mean of every metric over folds, one row per model."""
    console = Console(width=CONSOLE_TEXT_WIDTH)
    table = Table(
        title=title,
        box=box.MARKDOWN,
        padding=(0, 1, 0, 1),
        show_edge=False,
        title_style="italic",
        header_style=None,
    )
    table.add_column("Model")
    for name in METRIC_NAMES:
        table.add_column(name.capitalize() if len(name) > 3 else name.upper(), justify="right")
    for model, summary in aggregate.items():
        table.add_row(
            model, *(f"{summary[name]['mean']:.3f}" for name in METRIC_NAMES)
        )
    console.print(table)


def print_stage_summary(result: StageResult, config: PipelineConfig) -> None:
    echo_notice(f"Run directory: {config.output_dir}")
    for name, filename in sorted(result.manifest.artifacts.items()):
        click.echo(f"  {name}: {filename}")
    click.echo(f"Config hash: {result.manifest.config_hash}")
