"""Run configuration loaded from a JSON file.

Relative paths resolve against the config file's directory. Only the
``providers.api_key`` field may reference the environment (``${VAR}``);
secrets never live in the file itself and never enter a config hash.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from colmatch.enrich import EnrichmentConfig
from colmatch.errors import ConfigError
from colmatch.evaluation import DEFAULT_KS, NaPolicy
from colmatch.lexical import Bm25Params
from colmatch.pipeline import (
    DEFAULT_CONTEXT_BUDGET,
    DEFAULT_FINAL_K,
    AblationFlags,
    MatchConfig,
    RetrievalConfig,
)
from colmatch.providers import DEFAULT_PARALLELISM

_ENV_REF = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")


@dataclass(frozen=True)
class Paths:
    source_schema: Path | None = None
    target_schema: Path | None = None
    ground_truth: Path | None = None
    cache_dir: Path | None = None
    artifact_dir: Path = Path("artifacts")


@dataclass(frozen=True)
class ProviderSettings:
    mock: bool = False
    generation_model: str = "gpt-4.1-2025-04-14"
    embedding_model: str = "text-embedding-3-large"
    embedding_dimension: int = 3072
    endpoint: str = "https://api.openai.com/v1"
    api_key: str = ""
    timeout: float = 60.0
    parallelism: int = DEFAULT_PARALLELISM

    def public(self) -> dict[str, Any]:
        """Settings that shape outputs; excludes the credential and concurrency."""
        data = dataclasses.asdict(self)
        for private in ("api_key", "timeout", "parallelism"):
            data.pop(private)
        if self.mock:
            # the model fields do not reach the mocks
            data = {"mock": True, "embedding_dimension": self.embedding_dimension}
        return data


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    providers: ProviderSettings = field(default_factory=ProviderSettings)
    enrichment: EnrichmentConfig = field(default_factory=EnrichmentConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    ks: tuple[int, ...] = DEFAULT_KS
    final_k: int = DEFAULT_FINAL_K
    na_policy: NaPolicy = NaPolicy.EXCLUDE
    context_budget: int = DEFAULT_CONTEXT_BUDGET

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            enrichment=self.enrichment,
            retrieval=self.retrieval,
            ablation=self.ablation,
            final_k=self.final_k,
            parallelism=self.providers.parallelism,
        )

    def with_overrides(self, **changes: Any) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def index_settings(self) -> dict[str, Any]:
        """Everything that determines the target-side artifacts."""
        cfg = self.match_config()
        return {
            "providers": self.providers.public(),
            "enrichment": dataclasses.asdict(cfg.effective_enrichment()),
            "document_enrichment": self.ablation.document_enrichment,
            "bm25": dataclasses.asdict(self.bm25),
        }

    def run_settings(self) -> dict[str, Any]:
        """Everything that determines a manifest's predictions."""
        return {
            **self.index_settings(),
            "retrieval": dataclasses.asdict(self.retrieval),
            "ablation": dataclasses.asdict(self.ablation),
            "final_k": self.final_k,
            "context_budget": self.context_budget,
        }


def settings_hash(settings: Mapping[str, Any], *extra: str) -> str:
    canonical = json.dumps({"settings": settings, "inputs": list(extra)}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _resolve(base: Path, value: Any, key: str) -> Path | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"paths.{key}: expected a string")
    path = Path(value)
    return path if path.is_absolute() else base / path


def _section(data: Mapping[str, Any], key: str) -> dict[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected an object")
    return dict(value)


def _build(cls: type, values: dict[str, Any], where: str) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def interpolate_secret(value: str, environ: Mapping[str, str] | None = None) -> str:
    environ = os.environ if environ is None else environ
    match = _ENV_REF.match(value.strip())
    if not match:
        raise ConfigError('providers.api_key must reference an environment variable, e.g. "${OPENAI_API_KEY}"')
    name = match.group(1)
    if name not in environ or not environ[name]:
        raise ConfigError(f"environment variable {name} (provider credential) is not set")
    return environ[name]


def config_from_dict(data: Mapping[str, Any], base_dir: Path, environ: Mapping[str, str] | None = None) -> RunConfig:
    known = {"paths", "providers", "enrichment", "retrieval", "ablation", "bm25", "ks", "final_k", "na_policy", "context_budget"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    raw_paths = _section(data, "paths")
    paths = _build(Paths, {k: _resolve(base_dir, v, k) for k, v in raw_paths.items()}, "paths")
    if "artifact_dir" not in raw_paths:
        paths = dataclasses.replace(paths, artifact_dir=base_dir / "artifacts")
    raw_providers = _section(data, "providers")
    providers = _build(ProviderSettings, raw_providers, "providers")
    if providers.parallelism < 1:
        raise ConfigError("providers.parallelism must be >= 1")
    try:
        ks = tuple(int(k) for k in data.get("ks", DEFAULT_KS))
        na_policy = NaPolicy(data.get("na_policy", NaPolicy.EXCLUDE.value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not ks or min(ks) < 1:
        raise ConfigError("ks must be a non-empty list of positive integers")
    cfg = RunConfig(
        paths=paths,
        providers=providers,
        enrichment=_build(EnrichmentConfig, _section(data, "enrichment"), "enrichment"),
        retrieval=_build(RetrievalConfig, _section(data, "retrieval"), "retrieval"),
        ablation=_build(AblationFlags, _section(data, "ablation"), "ablation"),
        bm25=_build(Bm25Params, _section(data, "bm25"), "bm25"),
        ks=ks,
        final_k=int(data.get("final_k", DEFAULT_FINAL_K)),
        na_policy=na_policy,
        context_budget=int(data.get("context_budget", DEFAULT_CONTEXT_BUDGET)),
    )
    if not cfg.providers.mock:
        cfg = cfg.with_overrides(
            providers=dataclasses.replace(cfg.providers, api_key=interpolate_secret(cfg.providers.api_key, environ))
        )
    return cfg


def load_config(path: str | Path, environ: Mapping[str, str] | None = None, *, mock: bool = False) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if mock:
        data = dict(data)
        data["providers"] = {**_section(data, "providers"), "mock": True}
    return config_from_dict(data, path.parent.resolve(), environ)

