import click
import cloup

from sentidrop import actions
from sentidrop.cli.common import echo_notice, load_run_config, print_stage_summary
from sentidrop.cli.options import (
    input_options,
    mode_option,
    model_option,
    model_path_option,
    rows_option,
    run_options,
    sentiment_option,
    top_k_option,
)

TOP_FEATURES_SHOWN = 10


@cloup.command("train", short_help="Fit the prediction pipeline.")
@input_options
@cloup.option_group("Model options", model_option, sentiment_option, top_k_option)
@run_options
@click.pass_context
def train_command(ctx: click.Context, **options) -> None:
    """Fit preprocessing, sentiment features and the model on all students."""
    config = load_run_config(options)
    result = actions.model.train_pipeline(config)
    fitted = result.value
    echo_notice(f"Fitted '{fitted.settings.model}' on {len(fitted.selected_columns)} features.")
    print_stage_summary(result, config)


@cloup.command("predict", short_help="Predict dropout for students.")
@input_options
@model_path_option
@run_options
@click.pass_context
def predict_command(ctx: click.Context, **options) -> None:
    """Predict dropout probabilities with a fitted pipeline.

    Students at or above the decision threshold are listed separately, most
    at risk first.
    """
    config = load_run_config(options)
    result = actions.model.predict_dropout(config)
    print_stage_summary(result, config)


@cloup.command("explain", short_help="Explain predictions with SHAP values.")
@input_options
@model_path_option
@cloup.option_group("Explanation options", mode_option, rows_option)
@run_options
@click.pass_context
def explain_command(ctx: click.Context, **options) -> None:
    """Compute SHAP values of a fitted pipeline and rank features."""
    config = load_run_config(options)
    result = actions.model.explain_predictions(config)
    for rank, name in enumerate(result.value.names[:TOP_FEATURES_SHOWN], start=1):
        click.echo(f"{rank:>3}. {name}")
    print_stage_summary(result, config)


@cloup.command("select-features", short_help="Select features by SHAP importance.")
@input_options
@cloup.option_group("Selection options", top_k_option)
@run_options
@click.pass_context
def select_features_command(ctx: click.Context, **options) -> None:
    """Rank features by mean absolute SHAP value and keep the top k."""
    config = load_run_config(options)
    result = actions.model.select_features(config)
    print_stage_summary(result, config)
