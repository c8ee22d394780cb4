from pathlib import Path

import click
import cloup

from sentidrop import actions
from sentidrop.cli.common import (
    create_progress_reporter,
    echo_notice,
    load_run_config,
    print_metrics_table,
    print_stage_summary,
)
from sentidrop.cli.options import input_options, model_option, run_options, sentiment_option


@cloup.command("pipeline", short_help="Run all stages end to end.")
@input_options
@cloup.option_group("Model options", model_option, sentiment_option)
@run_options
@click.pass_context
def pipeline_command(ctx: click.Context, **options) -> None:
    """Run every stage in order: preprocessing, sentiment, evaluation,
    training, prediction, explanation, feature selection, ablation and the
    report.

    The outputs equal those of running the stage commands one by one with
    the same configuration.
    """
    config = load_run_config(options)
    progress_reporter = create_progress_reporter(ctx)
    with progress_reporter:
        result = actions.pipeline.run_pipeline(config, progress_reporter)
    echo_notice(f"Ran stages: {', '.join(result.value)}")
    if "cv" in result.value:
        print_metrics_table(result.value["cv"].value.aggregate, "Held-out metrics")
    print_stage_summary(result, config)


@cloup.command("report", short_help="Consolidate a run into report tables.")
@cloup.argument(
    "run_dir",
    metavar="[RUN_DIR]",
    required=False,
    type=click.Path(path_type=Path),
    help="Run directory; the configured output directory by default.",
)
@run_options
@click.pass_context
def report_command(ctx: click.Context, run_dir: Path | None, **options) -> None:
    """Write one plot-ready CSV per analysis found in a run directory."""
    config = load_run_config(options)
    result = actions.report.build_report(config, run_dir)
    print_stage_summary(result, config)
