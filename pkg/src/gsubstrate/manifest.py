"""Run manifests: enough to re-run a writing command and confirm identical bytes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ManifestMismatchError
from .ioutil import atomic_write, sha256_file

MANIFEST_SUFFIX = ".manifest.json"


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "argv": list(self.argv),
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }

    @classmethod
    def from_json(cls, data: dict) -> RunManifest:
        return cls(
            command=data["command"],
            argv=list(data["argv"]),
            config=dict(data.get("config") or {}),
            seed=data.get("seed"),
            inputs=dict(data.get("inputs") or {}),
            outputs=dict(data.get("outputs") or {}),
            version=data.get("version", __version__),
        )

    def write(self, path) -> Path:
        path = Path(path)
        with atomic_write(path) as fh:
            fh.write(json.dumps(self.to_json(), ensure_ascii=False, indent=2) + "\n")
        return path


def digests(paths) -> dict[str, str]:
    return {str(p): sha256_file(p) for p in paths}


def read_manifest(path) -> RunManifest:
    with open(path, encoding="utf-8") as fh:
        return RunManifest.from_json(json.load(fh))


def check_digests(expected: dict[str, str], what: str) -> None:
    """Raise ManifestMismatchError naming every file whose digest differs."""
    bad = []
    for name, digest in sorted(expected.items()):
        p = Path(name)
        if not p.exists():
            bad.append(f"{name} (missing)")
        elif sha256_file(p) != digest:
            bad.append(name)
    if bad:
        raise ManifestMismatchError(f"{what} differ from the manifest: {', '.join(bad)}")
