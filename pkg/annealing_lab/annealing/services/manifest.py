"""Run manifests and run directories.

Each command run gets ``runs/<timestamp>-<hash>/`` under ``LAB_OUTPUT_DIR``
holding ``manifest.json``, ``results.json`` (with the manifest embedded) and
any CSV tables. The hash covers the command and its canonical parameters, so
replaying a manifest lands next to the original run.
"""

from __future__ import annotations

import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Union

import pandas as pd
from django.conf import settings
from django.utils import timezone
from pydantic import BaseModel, ConfigDict, Field

from annealing.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=str) + "\n"


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def parameters_hash(command: str, parameters: dict) -> str:
    canonical = json.dumps({"command": command, "parameters": parameters}, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


class RunManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    parameters: dict[str, Any]
    seed: int | None = None
    artifact_version: str = Field(default_factory=lambda: getattr(settings, "LAB_ARTIFACT_VERSION", "1.0.0"))
    started_at: datetime = Field(default_factory=timezone.now)
    input_hashes: dict[str, str] = Field(default_factory=dict)

    @property
    def digest(self) -> str:
        return parameters_hash(self.command, self.parameters)

    def to_json_dict(self) -> dict:
        return self.model_dump(mode="json")


def load_manifest(path: PathLike) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise InvalidInputError(f"Manifest {path} does not exist.")
    data = json.loads(path.read_text(encoding="utf-8"))
    return RunManifest.model_validate(data.get("manifest", data))


class RunDirectory:
    def __init__(self, manifest: RunManifest, base_dir: PathLike | None = None):
        self.manifest = manifest
        base = Path(base_dir or getattr(settings, "LAB_OUTPUT_DIR", "lab_output"))
        stamp = manifest.started_at.strftime("%Y%m%dT%H%M%S")
        self.path = base / "runs" / f"{stamp}-{manifest.digest}"
        self.path.mkdir(parents=True, exist_ok=True)
        self.write_json("manifest.json", manifest.to_json_dict())
        logger.info("Run directory %s", self.path)

    @classmethod
    def create(cls, command: str, parameters: dict, seed: int | None = None,
               inputs: Iterable[PathLike] = (), base_dir: PathLike | None = None) -> RunDirectory:
        hashes = {str(p): sha256_file(p) for p in inputs if Path(p).is_file()}
        manifest = RunManifest(command=command, parameters=parameters, seed=seed, input_hashes=hashes)
        return cls(manifest, base_dir)

    def write_json(self, name: str, data: Any) -> Path:
        target = self.path / name
        target.write_text(dump_json(data), encoding="utf-8")
        return target

    def write_results(self, results: Any) -> Path:
        return self.write_json("results.json", {"manifest": self.manifest.to_json_dict(), "results": results})

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path / name
        frame.to_csv(target, index=False)
        return target
