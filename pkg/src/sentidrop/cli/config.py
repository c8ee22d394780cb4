import logging
import os
import sys
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import platformdirs
import structlog

from sentidrop.config import build_config, load_config_from_file, PipelineConfig


def _stderr_logger_factory(*args: Any) -> structlog.PrintLogger:
    return structlog.PrintLogger(sys.stderr)


def setup_logging(level: int) -> None:
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.dev.ConsoleRenderer(
                exception_formatter=structlog.dev.plain_traceback,
                # For details about NO_COLOR, see https://no-color.org/
                colors="NO_COLOR" not in os.environ,
            ),
            structlog.dev.set_exc_info,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        context_class=dict,
        # Resolved per call: the CLI runner swaps sys.stderr between runs.
        logger_factory=_stderr_logger_factory,
        cache_logger_on_first_use=False,
    )

    logging.getLogger("joblib").setLevel(logging.WARNING)


def get_default_config_path() -> Path:
    return platformdirs.user_config_path() / "sentidrop/config.toml"


def set_address(mapping: dict, address: str, value: Any) -> None:
    """Sets a nested value by a dotted address, creating sections on the way."""
    *sections, key = address.split(".")
    for section in sections:
        mapping = mapping.setdefault(section, {})
    mapping[key] = value


def flags_to_layer(flags: Mapping[str, Any]) -> dict:
    """Turns ``{"paths.tabular": value}`` flags into a nested config layer.

    Unset flags (None) are skipped so lower layers show through.
    """
    layer: dict = {}
    for address, value in flags.items():
        if value is not None:
            set_address(layer, address, value)
    return layer


def load_layered_config(
    config_path: Path | None,
    no_config: bool,
    flags: Mapping[str, Any],
) -> PipelineConfig:
    """Builds the run configuration: flags over the file over defaults.

    Without ``config_path``, the default user configuration file is read if
    it exists, unless ``no_config`` is set.
    """
    logger = structlog.get_logger(__name__)
    layers: list[Mapping] = [flags_to_layer(flags)]
    if config_path is not None:
        logger.info("Using configuration via --config", path=str(config_path))
        layers.append(load_config_from_file(config_path))
    elif not no_config:
        default_config_path = get_default_config_path()
        if default_config_path.exists():
            logger.info("Using configuration", path=str(default_config_path))
            layers.append(load_config_from_file(default_config_path))
    return build_config(*layers)
