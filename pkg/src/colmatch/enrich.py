"""Alternate-name generation for columns (target side at indexing, source side at query time)."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from colmatch import prompts
from colmatch.errors import ParseError, SchemaError
from colmatch.normalize import TokenizedName, normalize_name
from colmatch.providers import DEFAULT_PARALLELISM, GenerationProvider, GenerationRequest, bounded_map
from colmatch.schema import ColumnMeta, ColumnRef, SchemaDef, TableMeta

logger = logging.getLogger(__name__)

GENERATE_COUNT = 3
ENRICHMENT_FORMAT_VERSION = 1


class Origin(str, enum.Enum):
    EXPANSION = "expansion"
    CROSS_TERMINOLOGY = "cross_terminology"
    ORIGINAL = "original"


@dataclass(frozen=True)
class EnrichmentConfig:
    num_names: int = 3
    generate_count: int = GENERATE_COUNT
    use_expansion_prompt: bool = True
    use_cross_terminology_prompt: bool = True

    def __post_init__(self) -> None:
        if self.generate_count < 1:
            raise ValueError("generate_count must be >= 1")
        if not 1 <= self.num_names <= self.generate_count:
            raise ValueError(f"num_names must be in [1, {self.generate_count}], got {self.num_names}")

    def config_hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EnrichedName:
    text: str
    tokens: TokenizedName
    origin: Origin
    position: int

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "tokens": list(self.tokens.tokens), "origin": self.origin.value, "position": self.position}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EnrichedName:
        tokens = normalize_name(data["text"])
        if list(tokens.tokens) != list(data["tokens"]):
            raise SchemaError(f"stored tokens for {data['text']!r} do not match normalization")
        return cls(text=data["text"], tokens=tokens, origin=Origin(data["origin"]), position=int(data["position"]))


@dataclass(frozen=True)
class EnrichedColumn:
    meta: ColumnMeta
    table_description: str
    names: tuple[EnrichedName, ...]

    @property
    def ref(self) -> ColumnRef:
        return self.meta.ref

    @property
    def original(self) -> EnrichedName:
        return next(n for n in self.names if n.origin is Origin.ORIGINAL)

    def by_origin(self, origin: Origin) -> list[EnrichedName]:
        return [n for n in self.names if n.origin is origin]

    def restricted(self, *, keep: Callable[[EnrichedName], bool]) -> EnrichedColumn:
        """Copy holding only the names accepted by ``keep``; the original name always stays."""
        names = tuple(n for n in self.names if n.origin is Origin.ORIGINAL or keep(n))
        return EnrichedColumn(self.meta, self.table_description, names)


def original_name(col: ColumnMeta) -> EnrichedName:
    return EnrichedName(text=col.name, tokens=normalize_name(col.name), origin=Origin.ORIGINAL, position=1)


def _ask(llm: GenerationProvider, prompt: str, tag: str) -> list[str]:
    """One call plus one repair retry when the answer does not parse."""
    response = llm.generate(GenerationRequest(prompt=prompt))
    try:
        return prompts.parse_numbered_block(response, tag)
    except ParseError as first:
        logger.info("unparseable answer (%s); retrying with repair instruction", first)
    response = llm.generate(GenerationRequest(prompt=prompt + prompts.REPAIR_INSTRUCTION))
    return prompts.parse_numbered_block(response, tag)


def _collect(
    raw_names: list[str],
    origin: Origin,
    limit: int,
    seen: set[tuple[str, ...]],
    forbidden: frozenset[str] = frozenset(),
) -> list[EnrichedName]:
    kept = []
    for position, text in enumerate(raw_names, start=1):
        tokens = normalize_name(text)
        if not tokens.tokens or tokens.tokens in seen:
            continue
        if forbidden and forbidden.intersection(tokens.tokens):
            logger.debug("dropping %s name %r: reuses a table/column word", origin.value, text)
            continue
        seen.add(tokens.tokens)
        kept.append(EnrichedName(text=text, tokens=tokens, origin=origin, position=position))
    return kept[:limit]


def enrich_column(col: ColumnMeta, table: TableMeta, cfg: EnrichmentConfig, llm: GenerationProvider) -> EnrichedColumn:
    original = original_name(col)
    seen = {original.tokens.tokens}
    names: list[EnrichedName] = []
    if cfg.use_expansion_prompt:
        raw = _ask(llm, prompts.build_expansion_prompt(col, table, cfg.generate_count), "names")
        names += _collect(raw, Origin.EXPANSION, cfg.num_names, seen)
    if cfg.use_cross_terminology_prompt:
        raw = _ask(llm, prompts.build_cross_terminology_prompt(col, table, cfg.generate_count), "names")
        forbidden = frozenset(prompts.forbidden_words(col, table))
        names += _collect(raw, Origin.CROSS_TERMINOLOGY, cfg.num_names, seen, forbidden)
    names.append(original)
    return EnrichedColumn(meta=col, table_description=table.description, names=tuple(names))


def unenriched_column(col: ColumnMeta, table: TableMeta) -> EnrichedColumn:
    return EnrichedColumn(meta=col, table_description=table.description, names=(original_name(col),))


@dataclass(frozen=True)
class EnrichmentArtifact:
    """Enriched names for every column of one schema, keyed by column."""

    schema_name: str
    schema_hash: str
    config_hash: str
    provider_id: str
    columns: tuple[EnrichedColumn, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_ref", {c.ref: c for c in self.columns})

    def get(self, ref: ColumnRef) -> EnrichedColumn | None:
        return self._by_ref.get(ref)  # type: ignore[attr-defined]

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "colmatch-enrichment",
            "format_version": ENRICHMENT_FORMAT_VERSION,
            "schema_name": self.schema_name,
            "schema_hash": self.schema_hash,
            "config_hash": self.config_hash,
            "provider_id": self.provider_id,
            "columns": [
                {"ref": c.ref.to_dict(), "names": [n.to_dict() for n in c.names]}
                for c in self.columns
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, schema: SchemaDef) -> EnrichmentArtifact:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("format") != "colmatch-enrichment" or data.get("format_version") != ENRICHMENT_FORMAT_VERSION:
            raise SchemaError(f"{path}: not a version {ENRICHMENT_FORMAT_VERSION} enrichment artifact")
        columns = []
        for entry in data["columns"]:
            ref = ColumnRef.from_dict(entry["ref"])
            meta = schema.column(ref)
            table = schema.table(ref.table_name)
            if meta is None or table is None:
                raise SchemaError(f"{path}: column {ref} is not in schema {schema.name!r}")
            names = tuple(EnrichedName.from_dict(n) for n in entry["names"])
            columns.append(EnrichedColumn(meta=meta, table_description=table.description, names=names))
        return cls(
            schema_name=data["schema_name"],
            schema_hash=data["schema_hash"],
            config_hash=data["config_hash"],
            provider_id=data["provider_id"],
            columns=tuple(columns),
        )


def enrich_schema(
    schema: SchemaDef,
    cfg: EnrichmentConfig,
    llm: GenerationProvider,
    *,
    enabled: bool = True,
    parallelism: int = DEFAULT_PARALLELISM,
) -> EnrichmentArtifact:
    """Enrich every column of ``schema``; ``enabled=False`` keeps original names only."""
    pairs = list(schema.iter_columns())
    if enabled:
        columns = bounded_map(lambda tc: enrich_column(tc[1], tc[0], cfg, llm), pairs, parallelism)
    else:
        columns = [unenriched_column(col, table) for table, col in pairs]
    return EnrichmentArtifact(
        schema_name=schema.name,
        schema_hash=schema.content_hash(),
        config_hash=cfg.config_hash() if enabled else "original-names-only",
        provider_id=llm.provider_id if enabled else "none",
        columns=tuple(columns),
    )
