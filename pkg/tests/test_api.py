from pathlib import Path

import pytest

import sentidrop
from sentidrop.api import COMMANDS
from sentidrop.cli import cli
from sentidrop.config import build_config
from sentidrop.errors import ConfigError

from tests.helpers import FAST_CONFIG


def test_every_command_has_a_stage():
    assert set(COMMANDS) == set(cli.commands)


def test_unknown_command():
    with pytest.raises(ConfigError) as exc_info:
        sentidrop.run("deploy", build_config())
    assert exc_info.value.field == "command"


def test_run_then_load_inputs(tmp_path: Path):
    config = build_config({"paths": {"output": str(tmp_path)}}, FAST_CONFIG)
    result = sentidrop.run("gen", config)
    assert result.manifest.command == "gen"
    inputs = sentidrop.load_inputs(config)
    assert inputs.dataset.n == 120
    assert len(inputs.comments) == len(result.value[1])
