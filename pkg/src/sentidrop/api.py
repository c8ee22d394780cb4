from collections.abc import Callable

from sentidrop.actions import data, evaluate, model, pipeline, report, sentiment
from sentidrop.actions.common import load_inputs, StageResult
from sentidrop.config import PipelineConfig
from sentidrop.errors import ConfigError
from sentidrop.progress import ProgressReporter

#: Stage of every command.
COMMANDS: dict[str, Callable[..., StageResult]] = {
    "gen": data.generate_dataset,
    "preprocess": data.preprocess_dataset,
    "train-scorer": sentiment.train_sentiment_scorer,
    "score": sentiment.score_sentiment,
    "ttest": sentiment.run_sentiment_ttest,
    "train": model.train_pipeline,
    "predict": model.predict_dropout,
    "explain": model.explain_predictions,
    "select-features": model.select_features,
    "cv": evaluate.run_cross_validation,
    "grid": evaluate.run_grid_search,
    "ablate": evaluate.run_ablation,
    "pipeline": pipeline.run_pipeline,
    "report": report.build_report,
}

_REPORTING_COMMANDS = frozenset({"cv", "grid", "ablate", "pipeline"})


def run(
    command: str,
    config: PipelineConfig,
    progress_reporter: ProgressReporter | None = None,
) -> StageResult:
    """Runs one command on a configuration.

    Every command writes its artifacts and a ``<command>.manifest.json``
    into the configured output directory.

    Args:
        command: A command name, e.g. ``"cv"``.
        config: A run configuration, see :func:`sentidrop.config.build_config`.
        progress_reporter: Receives fold and grid progress of long commands.

    Returns:
        The written manifest and the in-memory result of the command.

    Raises:
        ConfigError: If the command is unknown or the configuration can't
          serve it.
    """
    try:
        action = COMMANDS[command]
    except KeyError:
        raise ConfigError("command", f"unknown command '{command}'") from None
    if command in _REPORTING_COMMANDS:
        return action(config, progress_reporter)
    return action(config)


__all__ = ("COMMANDS", "load_inputs", "run")
