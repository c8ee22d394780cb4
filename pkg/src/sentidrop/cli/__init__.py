import json
import logging
from copy import deepcopy
from dataclasses import dataclass
from typing import Any

import click
import cloup
import structlog

from sentidrop._version import __version__
from sentidrop.cli.commands.data import gen_command, preprocess_command
from sentidrop.cli.commands.evaluate import ablate_command, cv_command, grid_command
from sentidrop.cli.commands.model import (
    explain_command,
    predict_command,
    select_features_command,
    train_command,
)
from sentidrop.cli.commands.pipeline import pipeline_command, report_command
from sentidrop.cli.commands.sentiment import (
    score_command,
    train_scorer_command,
    ttest_command,
)
from sentidrop.cli.common import suppress_output
from sentidrop.cli.config import setup_logging
from sentidrop.cli.options import logging_options
from sentidrop.errors import IoError, SentidropError

logger = structlog.get_logger(__name__)


@dataclass
class ContextObject:
    """This object is referenced as `ctx.obj`."""

    quiet: bool = False
    debug: bool = False


def echo_error(error: SentidropError) -> None:
    click.echo(json.dumps(error.to_dict(), sort_keys=True), err=True)


class SentidropGroup(cloup.Group):
    """A group reporting package errors as JSON on stderr with exit status 1."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except SentidropError as exc:
            logger.debug("Command failed", exc_info=exc)
            echo_error(exc)
        except OSError as exc:
            logger.debug("Command failed", exc_info=exc)
            echo_error(IoError(str(exc)))
        ctx.exit(1)


@cloup.group(cls=SentidropGroup, invoke_without_command=True)
@cloup.option_group(
    "Global options",
    logging_options,
    click.option(
        "-q",
        "--quiet",
        help="Supress all normal output.",
        default=False,
        is_flag=True,
        is_eager=True,
    ),
)
@click.version_option(__version__, "-V", "--version", message="%(version)s")
@click.pass_context
def base_cli(ctx: click.Context, debug: bool, quiet: bool) -> None:
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit()

    ctx.ensure_object(ContextObject)
    ctx.obj.quiet = quiet
    ctx.obj.debug = debug

    if quiet:
        suppress_output()

    setup_logging(logging.DEBUG if debug else logging.WARNING)


cli = deepcopy(base_cli)
cli.help = "Dropout prediction from student records and comment sentiment"
cli.section("Data", gen_command, preprocess_command)
cli.section("Sentiment", train_scorer_command, score_command, ttest_command)
cli.section(
    "Model",
    train_command,
    predict_command,
    explain_command,
    select_features_command,
)
cli.section("Evaluation", cv_command, grid_command, ablate_command)
cli.section("Run", pipeline_command, report_command)
