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
from sentidrop.cli.options import (
    family_option,
    folds_option,
    input_options,
    model_option,
    run_options,
    sentiment_option,
)
from sentidrop.evaluation import Arm


@cloup.command("cv", short_help="Cross-validate on student groups.")
@input_options
@cloup.option_group("Evaluation options", model_option, sentiment_option, folds_option)
@run_options
@click.pass_context
def cv_command(ctx: click.Context, **options) -> None:
    """Cross-validate the pipeline with all rows and comments of a student
    kept in one fold.

    Every fold fits preprocessing, the scorer and the models on its training
    students only.
    """
    config = load_run_config(options)
    progress_reporter = create_progress_reporter(ctx)
    with progress_reporter:
        result = actions.evaluate.run_cross_validation(config, progress_reporter)
    print_metrics_table(result.value.aggregate, "Held-out metrics (mean over folds)")
    print_stage_summary(result, config)


@cloup.command("grid", short_help="Tune hyper-parameters of a model family.")
@input_options
@cloup.option_group("Evaluation options", family_option, folds_option)
@run_options
@click.pass_context
def grid_command(ctx: click.Context, **options) -> None:
    """Cross-validate every point of the configured hyper-parameter grid.

    The best point has the highest mean accuracy, then AUC.
    """
    config = load_run_config(options)
    progress_reporter = create_progress_reporter(ctx)
    with progress_reporter:
        result = actions.evaluate.run_grid_search(config, progress_reporter)
    search = result.value
    echo_notice(f"Best {search.family} configuration: {search.best_config}")
    print_metrics_table(
        {search.family: search.best_result.aggregate[search.family]},
        "Best configuration (mean over folds)",
    )
    print_stage_summary(result, config)


@cloup.command("ablate", short_help="Compare models with and without sentiment.")
@input_options
@cloup.option_group("Evaluation options", folds_option)
@run_options
@click.pass_context
def ablate_command(ctx: click.Context, **options) -> None:
    """Cross-validate every model with and without the sentiment block.

    All arms share folds and seeds, so they differ only in their columns.
    """
    config = load_run_config(options)
    progress_reporter = create_progress_reporter(ctx)
    with progress_reporter:
        result = actions.evaluate.run_ablation(config, progress_reporter)
    report = result.value
    for arm in report.arms:
        print_metrics_table(
            {model: report.results[model, arm].aggregate[model] for model in report.models},
            f"Arm: {arm}",
        )
    deltas = report.deltas(Arm.WITH_SENTIMENT)
    accuracy = deltas[deltas["metric"] == "accuracy"]
    for row in accuracy.itertuples():
        echo_notice(f"{row.model}: accuracy delta {row.delta:+.4f}")
    print_stage_summary(result, config)
