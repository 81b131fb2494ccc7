"""Command-line driver: index, match, evaluate, ablate.

Exit codes: 0 success, 1 validation error, 2 provider failure, 3 evaluation mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import shutil
import sys
from collections.abc import Sequence
from importlib import resources
from pathlib import Path
from typing import Any

from colmatch import artifacts
from colmatch.config import RunConfig, load_config, settings_hash
from colmatch.errors import ColmatchError, ConfigError, EvaluationError, ProviderError, ValidationError
from colmatch.evaluation import MetricsReport, evaluate_manifest
from colmatch.manifest import MODE_NEEDLE, MODE_PIPELINE, RunManifest, canonical_json, sha256_text
from colmatch.mock import MockEmbedder, MockLLM
from colmatch.pipeline import ABLATION_FLAGS, TargetArtifacts, build_target_artifacts, match_schema, run_needle_baseline
from colmatch.providers import (
    CachedEmbedder,
    CachedGenerator,
    EmbeddingProvider,
    GenerationProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    ResponseCache,
)
from colmatch.schema import GroundTruth, SchemaDef, load_ground_truth, load_schema

logger = logging.getLogger("colmatch")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PROVIDER = 2
EXIT_EVALUATION = 3

DEFAULT_CONFIG = "colmatch.json"
DEMO_FILES = ("source_schema.json", "target_schema.json", "ground_truth.csv")


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


# ---------------------------------------------------------------------------
# session: config, schemas and providers for one invocation


@dataclasses.dataclass
class Session:
    cfg: RunConfig
    _llm: GenerationProvider | None = None
    _embedder: EmbeddingProvider | None = None
    _cache: ResponseCache | None = None

    def _require(self, path: Path | None, what: str) -> Path:
        if path is None:
            raise ConfigError(f"paths.{what} is not set in the config")
        return path

    def source(self) -> SchemaDef:
        return load_schema(self._require(self.cfg.paths.source_schema, "source_schema"))

    def target(self) -> SchemaDef:
        return load_schema(self._require(self.cfg.paths.target_schema, "target_schema"))

    def ground_truth(self, source: SchemaDef, target: SchemaDef) -> GroundTruth:
        return load_ground_truth(self._require(self.cfg.paths.ground_truth, "ground_truth"), source, target)

    @property
    def cache(self) -> ResponseCache:
        if self._cache is None:
            self._cache = ResponseCache(self.cfg.paths.cache_dir)
        return self._cache

    @property
    def llm(self) -> GenerationProvider:
        if self._llm is None:
            p = self.cfg.providers
            if p.mock:
                base: GenerationProvider = MockLLM()
            else:
                base = HttpChatProvider(p.endpoint, p.generation_model, p.api_key, timeout=p.timeout)
            self._llm = CachedGenerator(base, self.cache)
        return self._llm

    @property
    def embedder(self) -> EmbeddingProvider:
        if self._embedder is None:
            p = self.cfg.providers
            if p.mock:
                base: EmbeddingProvider = MockEmbedder(p.embedding_dimension)
            else:
                base = HttpEmbeddingProvider(
                    p.endpoint, p.embedding_model, p.api_key, dimension=p.embedding_dimension, timeout=p.timeout
                )
            self._embedder = CachedEmbedder(base, self.cache)
        return self._embedder

    def with_config(self, cfg: RunConfig) -> Session:
        """Same providers and cache, different run settings."""
        if cfg.providers != self.cfg.providers or cfg.paths != self.cfg.paths:
            raise ConfigError("a derived session must keep the provider and path settings")
        return Session(cfg, self.llm, self.embedder, self.cache)

    def provider_ids(self) -> dict[str, str]:
        p = self.cfg.providers
        if p.mock:
            return {"generation": MockLLM.provider_id, "embedding": f"mock-embed-v1:{p.embedding_dimension}"}
        return {
            "generation": f"http-chat:{p.generation_model}",
            "embedding": f"http-embed:{p.embedding_model}:{p.embedding_dimension}",
        }


def index_hash(cfg: RunConfig, target: SchemaDef) -> str:
    return settings_hash(cfg.index_settings(), target.content_hash())


def run_hash(cfg: RunConfig, mode: str, source: SchemaDef, target: SchemaDef) -> str:
    return settings_hash(run_settings(cfg, mode), source.content_hash(), target.content_hash())


def run_settings(cfg: RunConfig, mode: str) -> dict[str, Any]:
    if mode == MODE_NEEDLE:
        return {
            "mode": mode,
            "providers": cfg.providers.public(),
            "final_k": cfg.final_k,
            "context_budget": cfg.context_budget,
        }
    return {"mode": mode, **cfg.run_settings()}


# ---------------------------------------------------------------------------
# commands


def ensure_index(session: Session, target: SchemaDef, *, rebuild: bool, build_missing: bool) -> tuple[TargetArtifacts, dict[str, str]]:
    """Load the target artifacts for the current config, building them if allowed."""
    cfg = session.cfg
    ihash = index_hash(cfg, target)
    directory = artifacts.index_dir(cfg.paths.artifact_dir, ihash)
    if not rebuild:
        if artifacts.artifacts_present(directory):
            loaded = artifacts.load_target_artifacts(directory, target, ihash)
            return loaded, artifacts.artifact_hashes(directory)
        if not build_missing:
            artifacts.load_target_artifacts(directory, target, ihash)  # raises StaleArtifactError
    built = build_target_artifacts(target, cfg.match_config(), session.llm, session.embedder, bm25=cfg.bm25)
    hashes = artifacts.save_target_artifacts(directory, built, ihash)
    logger.info("wrote index artifacts to %s", directory)
    return built, hashes


def cmd_index(session: Session, *, rebuild: bool = False) -> Path:
    cfg = session.cfg
    target = session.target()
    ihash = index_hash(cfg, target)
    directory = artifacts.index_dir(cfg.paths.artifact_dir, ihash)
    if not rebuild and artifacts.artifacts_present(directory):
        artifacts.load_target_artifacts(directory, target, ihash)
        _out(f"index up to date: {directory} (config {ihash[:12]})")
        return directory
    built, _ = ensure_index(session, target, rebuild=True, build_missing=True)
    _out(
        f"indexed {target.n_columns} target columns of {target.name!r}: "
        f"{len(built.lexical.docs)} documents -> {directory} (config {ihash[:12]})"
    )
    return directory


def manifest_path(cfg: RunConfig, mode: str) -> Path:
    suffix = "needle" if mode == MODE_NEEDLE else "-".join(f"no_{flag}" for flag in cfg.ablation.disabled())
    name = f"manifest.{suffix}.json" if suffix else "manifest.json"
    return cfg.paths.artifact_dir / name


def cmd_match(session: Session, *, baseline: str | None = None, rebuild: bool = False, output: Path | None = None) -> Path:
    cfg = session.cfg
    source, target = session.source(), session.target()
    if baseline == MODE_NEEDLE:
        result = run_needle_baseline(
            source,
            target,
            session.llm,
            top_k=cfg.final_k,
            context_budget=cfg.context_budget,
            parallelism=cfg.providers.parallelism,
        )
        mode, index_hashes = MODE_NEEDLE, {}
    else:
        built, index_hashes = ensure_index(session, target, rebuild=rebuild, build_missing=rebuild)
        result = match_schema(source, built, cfg.match_config(), session.llm, session.embedder)
        mode = MODE_PIPELINE
    providers = session.provider_ids()
    if mode == MODE_NEEDLE:
        providers.pop("embedding")
    manifest = RunManifest(
        mode=mode,
        config_hash=run_hash(cfg, mode, source, target),
        config=run_settings(cfg, mode),
        providers=providers,
        source_schema={"name": source.name, "hash": source.content_hash()},
        target_schema={"name": target.name, "hash": target.content_hash()},
        predictions=result.predictions,
        failures=result.failures,
        index_artifacts=index_hashes,
    )
    path = output or manifest_path(cfg, mode)
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = manifest.save(path)
    _out(
        f"{mode} run: {len(result.predictions)} source columns, {len(result.failures)} failed -> {path} "
        f"(sha256 {digest[:12]}, config {manifest.config_hash[:12]})"
    )
    for failure in result.failures:
        _out(f"  failed {failure.source}: {failure.error}")
    return path


def _report_paths(manifest_file: Path, output_dir: Path | None) -> tuple[Path, Path, Path]:
    stem = manifest_file.name.removesuffix(".json")
    base = (output_dir or manifest_file.parent) / stem
    return base.with_name(stem + ".report.json"), base.with_name(stem + ".report.txt"), base.with_name(stem + ".detail.csv")


def evaluate_file(
    session: Session, manifest_file: Path, *, ks: Sequence[int] | None = None, force: bool = False, output_dir: Path | None = None
) -> tuple[MetricsReport, RunManifest]:
    cfg = session.cfg
    manifest = RunManifest.load(manifest_file)
    source, target = session.source(), session.target()
    gt = session.ground_truth(source, target)
    report = evaluate_manifest(manifest, gt, ks or cfg.ks, na_policy=cfg.na_policy, force_hit_rate=force)
    manifest_hash = sha256_text(manifest_file.read_text(encoding="utf-8"))
    json_path, txt_path, csv_path = _report_paths(manifest_file, output_dir)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "manifest": {"file": manifest_file.name, "sha256": manifest_hash, "config_hash": manifest.config_hash},
        "mode": manifest.mode,
        "baseline": manifest.baseline,
        "na_policy": cfg.na_policy.value,
        "report": report.to_dict(),
    }
    json_path.write_text(canonical_json(payload), encoding="utf-8")
    header = f"manifest {manifest_file.name} (sha256 {manifest_hash[:12]}, config {manifest.config_hash[:12]})\n"
    txt_path.write_text(header + report.render_table(), encoding="utf-8")
    csv_path.write_text(report.detail_csv(), encoding="utf-8")
    return report, manifest


def cmd_evaluate(
    session: Session, manifest_file: Path, *, ks: Sequence[int] | None = None, force: bool = False, output_dir: Path | None = None
) -> MetricsReport:
    report, _ = evaluate_file(session, manifest_file, ks=ks, force=force, output_dir=output_dir)
    _out(report.render_table())
    return report


def render_ablation_table(rows: list[tuple[str, MetricsReport]]) -> str:
    first = rows[0][1]
    metric = "Recall" if first.hit_rate_suppressed else "HitRate"
    header = ["Component removed"] + [f"{metric}@{k}" for k in first.ks]
    body = []
    for label, report in rows:
        values = report.recall if report.hit_rate_suppressed else report.hit_rate
        body.append([label] + [f"{100 * values[k]:.2f}%" for k in report.ks])
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *body]]
    return "\n".join(lines) + "\n"


def cmd_ablate(
    session: Session,
    *,
    ks: Sequence[int] | None = None,
    force: bool = False,
    rebuild: bool = False,
    flags: Sequence[str] = ABLATION_FLAGS,
) -> list[tuple[str, MetricsReport]]:
    """Full pipeline plus one run per disabled component, evaluated side by side."""
    base = session.cfg
    root = base.paths.artifact_dir / "ablation"
    variants = [("None (full pipeline)", base.ablation)]
    variants += [(flag, base.ablation.without(flag)) for flag in flags]
    rows = []
    for label, ablation in variants:
        cfg = base.with_overrides(ablation=ablation)
        variant = session.with_config(cfg)
        target = variant.target()
        built, index_hashes = ensure_index(variant, target, rebuild=rebuild, build_missing=True)
        source = variant.source()
        result = match_schema(source, built, cfg.match_config(), variant.llm, variant.embedder)
        manifest = RunManifest(
            mode=MODE_PIPELINE,
            config_hash=run_hash(cfg, MODE_PIPELINE, source, target),
            config=run_settings(cfg, MODE_PIPELINE),
            providers=variant.provider_ids(),
            source_schema={"name": source.name, "hash": source.content_hash()},
            target_schema={"name": target.name, "hash": target.content_hash()},
            predictions=result.predictions,
            failures=result.failures,
            index_artifacts=index_hashes,
        )
        root.mkdir(parents=True, exist_ok=True)
        path = root / manifest_path(cfg, MODE_PIPELINE).name
        manifest.save(path)
        report, _ = evaluate_file(variant, path, ks=ks, force=force)
        rows.append((label, report))
    table = render_ablation_table(rows)
    (root / "ablation.txt").write_text(table, encoding="utf-8")
    _out(table)
    return rows


def cmd_init_demo(directory: Path) -> Path:
    """Copy the bundled demo schemas and a mock-provider config into ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    demo = resources.files("colmatch.data.demo")
    for name in DEMO_FILES:
        with resources.as_file(demo / name) as src:
            shutil.copyfile(src, directory / name)
    config = {
        "paths": {
            "source_schema": "source_schema.json",
            "target_schema": "target_schema.json",
            "ground_truth": "ground_truth.csv",
            "cache_dir": "cache",
            "artifact_dir": "artifacts",
        },
        "providers": {"mock": True, "embedding_dimension": 384},
    }
    path = directory / DEFAULT_CONFIG
    path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    _out(f"wrote demo config to {path}")
    return path


# ---------------------------------------------------------------------------
# argument parsing


def _parse_ks(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--k expects a comma-separated list of integers, got {text!r}") from exc
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("--k values must be positive integers")
    return ks


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code; 2 is reserved for provider failures."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=Path(DEFAULT_CONFIG), help="run config (JSON)")
    common.add_argument("--mock-providers", action="store_true", help="use the offline mock LLM and embedder")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="colmatch", description="LLM-assisted schema matching.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_index = sub.add_parser("index", parents=[common], help="enrich and index the target schema")
    p_index.add_argument("--rebuild", action="store_true")
    p_index.add_argument("--ablate", action="append", default=[], choices=ABLATION_FLAGS, metavar="FLAG")

    p_match = sub.add_parser("match", parents=[common], help="match every source column")
    p_match.add_argument("--rebuild", action="store_true", help="build index artifacts if missing or stale")
    p_match.add_argument("--baseline", choices=[MODE_NEEDLE], help="run the full-schema baseline instead")
    p_match.add_argument("--ablate", action="append", default=[], choices=ABLATION_FLAGS, metavar="FLAG")
    p_match.add_argument("--output", type=Path, help="manifest path")

    p_eval = sub.add_parser("evaluate", parents=[common], help="score a run manifest")
    p_eval.add_argument("--manifest", type=Path, required=True)
    p_eval.add_argument("--k", type=_parse_ks, help="comma-separated cutoffs, e.g. 1,3,5")
    p_eval.add_argument("--force", action="store_true", help="report hit rate even on m:n ground truth")
    p_eval.add_argument("--output-dir", type=Path)

    p_ablate = sub.add_parser("ablate", parents=[common], help="run the single-component ablation sweep")
    p_ablate.add_argument("--k", type=_parse_ks)
    p_ablate.add_argument("--force", action="store_true")
    p_ablate.add_argument("--rebuild", action="store_true")

    p_demo = sub.add_parser("init-demo", help="write the bundled demo schemas and config")
    p_demo.add_argument("directory", type=Path)
    return parser


def _session(args: argparse.Namespace) -> Session:
    cfg = load_config(args.config, mock=args.mock_providers)
    ablate = getattr(args, "ablate", [])
    if ablate:
        ablation = cfg.ablation
        for flag in ablate:
            ablation = ablation.without(flag)
        cfg = cfg.with_overrides(ablation=ablation)
        cfg.match_config().effective_retrieval()
    return Session(cfg)


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "init-demo":
        cmd_init_demo(args.directory)
        return
    session = _session(args)
    if args.command == "index":
        cmd_index(session, rebuild=args.rebuild)
    elif args.command == "match":
        cmd_match(session, baseline=args.baseline, rebuild=args.rebuild, output=args.output)
    elif args.command == "evaluate":
        cmd_evaluate(session, args.manifest, ks=args.k, force=args.force, output_dir=args.output_dir)
    elif args.command == "ablate":
        cmd_ablate(session, ks=args.k, force=args.force, rebuild=args.rebuild)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _dispatch(args)
    except EvaluationError as exc:
        print(f"error: evaluation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    except ProviderError as exc:
        print(f"error: provider: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except ValidationError as exc:
        print(f"error: validation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ColmatchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
