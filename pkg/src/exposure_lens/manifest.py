"""Run manifests: enough provenance to reproduce any output byte for byte.

A manifest records the command line, a hash of the effective
configuration, digests of every input and output file, the seed, and the
package version. Two runs with identical manifests (timestamps aside)
produce identical numeric outputs; ``verify_outputs`` re-checks the
recorded digests on disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ValidationError

ARTIFACT_VERSION = "0.1.0"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: tuple[str, ...]
    config_hash: str
    inputs: Mapping[str, str]
    outputs: Mapping[str, str]
    seed: int | None
    version: str = ARTIFACT_VERSION
    timestamp: str = ""

    def to_json(self) -> str:
        payload = {
            "command": list(self.command),
            "config_hash": self.config_hash,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "seed": self.seed,
            "version": self.version,
            "timestamp": self.timestamp,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        raw = json.loads(text)
        try:
            return RunManifest(
                command=tuple(raw["command"]),
                config_hash=raw["config_hash"],
                inputs=dict(raw["inputs"]),
                outputs=dict(raw["outputs"]),
                seed=raw["seed"],
                version=raw["version"],
                timestamp=raw.get("timestamp", ""),
            )
        except KeyError as exc:
            raise ValidationError(f"manifest missing field {exc}") from None

    def same_run(self, other: "RunManifest") -> bool:
        """Equality ignoring the timestamp."""
        return (
            self.command == other.command
            and self.config_hash == other.config_hash
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and self.seed == other.seed
            and self.version == other.version
        )


def build_manifest(
    command: Sequence[str],
    input_paths: Sequence[str | Path],
    output_paths: Sequence[str | Path],
    seed: int | None,
    config_text: str = "",
) -> RunManifest:
    return RunManifest(
        command=tuple(str(c) for c in command),
        config_hash=sha256_text(config_text),
        inputs={str(p): sha256_file(p) for p in input_paths},
        outputs={str(p): sha256_file(p) for p in output_paths},
        seed=seed,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def manifest_path_for(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def write_manifest(manifest: RunManifest, beside: str | Path) -> Path:
    path = manifest_path_for(beside)
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


def verify_outputs(manifest: RunManifest) -> list[str]:
    """Paths whose on-disk digest no longer matches the manifest."""
    stale = []
    for path, digest in manifest.outputs.items():
        if not Path(path).exists() or sha256_file(path) != digest:
            stale.append(path)
    return stale
