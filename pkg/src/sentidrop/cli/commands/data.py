import click
import cloup

from sentidrop import actions
from sentidrop.cli.common import echo_notice, load_run_config, print_stage_summary
from sentidrop.cli.options import (
    input_options,
    outliers_option,
    preset_option,
    run_options,
    scaling_option,
    students_option,
)


@cloup.command("gen", short_help="Generate synthetic data.")
@cloup.option_group("Generator options", preset_option, students_option)
@run_options
@click.pass_context
def gen_command(ctx: click.Context, **options) -> None:
    """Generate synthetic students, comments and dropout labels.

    The ground truth of the generating mechanism is written next to the
    data. The --seed option seeds the generator.
    """
    config = load_run_config(options)
    result = actions.data.generate_dataset(config)
    dataset, comments, _ = result.value
    echo_notice(f"Generated {dataset.n} students and {len(comments)} comments.")
    print_stage_summary(result, config)


@cloup.command("preprocess", short_help="Impute, flag outliers and scale.")
@input_options
@cloup.option_group("Preprocessing options", scaling_option, outliers_option)
@run_options
@click.pass_context
def preprocess_command(ctx: click.Context, **options) -> None:
    """Impute missing values, flag outliers and scale the tabular data.

    Also writes the feature correlation matrix, a validation report of the
    inputs and text statistics of the comments.
    """
    config = load_run_config(options)
    result = actions.data.preprocess_dataset(config)
    for warning in result.value.warnings:
        echo_notice(warning)
    print_stage_summary(result, config)
