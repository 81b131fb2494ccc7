"""Run manifest: the per-column predictions of one run plus its provenance.

Serialized as sorted, indented JSON with no timestamps, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from colmatch.errors import ValidationError
from colmatch.pipeline import ColumnFailure, RankedPrediction
from colmatch.schema import ColumnRef

MANIFEST_FORMAT_VERSION = 1
MODE_PIPELINE = "pipeline"
MODE_NEEDLE = "needle"


def canonical_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    mode: str
    config_hash: str
    config: Mapping[str, Any]
    providers: Mapping[str, str]
    source_schema: Mapping[str, str]
    target_schema: Mapping[str, str]
    predictions: tuple[RankedPrediction, ...]
    failures: tuple[ColumnFailure, ...] = ()
    index_artifacts: Mapping[str, str] = field(default_factory=dict)

    @property
    def baseline(self) -> bool:
        return self.mode == MODE_NEEDLE

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "colmatch-run-manifest",
            "format_version": MANIFEST_FORMAT_VERSION,
            "mode": self.mode,
            "baseline": self.baseline,
            "config_hash": self.config_hash,
            "config": dict(self.config),
            "providers": dict(self.providers),
            "source_schema": dict(self.source_schema),
            "target_schema": dict(self.target_schema),
            "index_artifacts": dict(self.index_artifacts),
            "predictions": [
                {"source": p.source.to_dict(), "ranked_targets": [t.to_dict() for t in p.ranked_targets]}
                for p in self.predictions
            ],
            "failures": [{"source": f.source.to_dict(), "error": f.error} for f in self.failures],
        }

    def dumps(self) -> str:
        return canonical_json(self.to_dict())

    def save(self, path: str | Path) -> str:
        """Write the manifest and return its SHA-256."""
        text = self.dumps()
        Path(path).write_text(text, encoding="utf-8")
        return sha256_text(text)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunManifest:
        if data.get("format") != "colmatch-run-manifest" or data.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise ValidationError(f"not a version {MANIFEST_FORMAT_VERSION} run manifest")
        baseline = data["mode"] == MODE_NEEDLE
        predictions = []
        seen: set[ColumnRef] = set()
        for entry in data["predictions"]:
            source = ColumnRef.from_dict(entry["source"])
            if source in seen:
                raise ValidationError(f"manifest lists source column {source} twice")
            seen.add(source)
            targets = tuple(ColumnRef.from_dict(t) for t in entry["ranked_targets"])
            if len(set(targets)) != len(targets):
                raise ValidationError(f"manifest prediction for {source} repeats a target column")
            predictions.append(RankedPrediction(source, targets, baseline=baseline))
        return cls(
            mode=data["mode"],
            config_hash=data["config_hash"],
            config=data["config"],
            providers=data["providers"],
            source_schema=data["source_schema"],
            target_schema=data["target_schema"],
            predictions=tuple(predictions),
            failures=tuple(ColumnFailure(ColumnRef.from_dict(f["source"]), f["error"]) for f in data["failures"]),
            index_artifacts=data.get("index_artifacts", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> RunManifest:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: malformed manifest ({exc})") from exc
