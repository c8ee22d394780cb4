import click
import cloup

from sentidrop import actions
from sentidrop.cli.common import echo_notice, load_run_config, print_stage_summary
from sentidrop.cli.options import input_options, run_options


@cloup.command("train-scorer", short_help="Train the sentiment scorer.")
@input_options
@run_options
@click.pass_context
def train_scorer_command(ctx: click.Context, **options) -> None:
    """Train the n-gram sentiment scorer on gold-labeled comments."""
    config = load_run_config(options)
    result = actions.sentiment.train_sentiment_scorer(config)
    scorer = result.value
    if scorer.holdout_accuracy is not None:
        echo_notice(f"Holdout accuracy: {scorer.holdout_accuracy:.3f}")
    else:
        echo_notice("Too few labeled comments for a holdout estimate.")
    print_stage_summary(result, config)


@cloup.command("score", short_help="Score comments and aggregate sentiment.")
@input_options
@run_options
@click.pass_context
def score_command(ctx: click.Context, **options) -> None:
    """Score comments and aggregate them per month and per student.

    With labeled student records, dropout rates of early-negative students
    and of engagement and sentiment groups are written as well.
    """
    config = load_run_config(options)
    result = actions.sentiment.score_sentiment(config)
    print_stage_summary(result, config)


@cloup.command("ttest", short_help="Test the first-to-last month sentiment shift.")
@input_options
@run_options
@click.pass_context
def ttest_command(ctx: click.Context, **options) -> None:
    """Paired t-test of first-month against last-month mean sentiment."""
    config = load_run_config(options)
    result = actions.sentiment.run_sentiment_ttest(config)
    ttest = result.value
    echo_notice(
        "t = {:.4f}, df = {}, p = {:.4f} (n = {})".format(
            ttest.t_statistic,
            ttest.degrees_of_freedom,
            ttest.p_value_two_sided,
            ttest.n,
        )
    )
    print_stage_summary(result, config)
