"""Run manifests and deterministic JSON artifacts.

Every command writes ``<command>.manifest.json`` next to its artifacts. The
manifest records the canonical configuration, its SHA-256 hash, the seed,
package versions and the artifact files, so a run can be reproduced and
collected by ``report``.
"""

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Self

import numpy as np
import structlog

from sentidrop._version import __version__
from sentidrop.errors import MissingArtifactsError

logger = structlog.get_logger(__name__)

MANIFEST_SUFFIX = ".manifest.json"

_VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "joblib")


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set, frozenset)):
        return list(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def config_hash(config: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def package_versions() -> dict[str, str]:
    versions = {"sentidrop": __version__}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_json(path: Path, obj: Any) -> None:
    """Writes indented JSON with sorted keys and a trailing newline."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_default)
        f.write("\n")


def read_json(path: Path) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict[str, Any]
    seed: int
    #: Artifact name to file name, relative to the run directory.
    artifacts: dict[str, str] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=package_versions)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "artifacts": self.artifacts,
            "versions": self.versions,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Self:
        return cls(
            command=d["command"],
            config=d["config"],
            seed=int(d["seed"]),
            artifacts=dict(d.get("artifacts", {})),
            versions=dict(d.get("versions", {})),
        )


def write_manifest(run_directory: Path, manifest: RunManifest) -> Path:
    path = run_directory / f"{manifest.command}{MANIFEST_SUFFIX}"
    write_json(path, manifest.to_dict())
    logger.debug("Wrote run manifest", path=str(path), artifacts=len(manifest.artifacts))
    return path


def read_manifests(run_directory: Path) -> list[RunManifest]:
    """Reads all manifests of a run directory, sorted by command name.

    Raises:
        MissingArtifactsError: If the directory has no manifests.
    """
    paths = sorted(Path(run_directory).glob(f"*{MANIFEST_SUFFIX}"))
    if not paths:
        raise MissingArtifactsError(str(run_directory))
    return [RunManifest.from_dict(read_json(path)) for path in paths]


def collect_artifacts(run_directory: Path) -> dict[str, Path]:
    """Maps artifact names of all manifests to existing files.

    Later commands (by name) win when two manifests share an artifact name.
    """
    found: dict[str, Path] = {}
    for manifest in read_manifests(run_directory):
        for name, filename in manifest.artifacts.items():
            path = Path(run_directory) / filename
            if path.exists():
                found[name] = path
    return found
