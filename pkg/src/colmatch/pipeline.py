"""Query-time matching: enrich a source column, retrieve candidates from both
indexes, narrow them by table, and let the LLM rank what is left.

Also holds the retrieval-free full-schema baseline and the ablation switches.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import random
from collections.abc import Sequence
from dataclasses import dataclass, field

from colmatch import prompts
from colmatch.enrich import (
    EnrichedColumn,
    EnrichedName,
    EnrichmentArtifact,
    EnrichmentConfig,
    Origin,
    enrich_column,
    enrich_schema,
    unenriched_column,
)
from colmatch.errors import ColmatchError, ConfigError, ContextBudgetExceededError, ParseError
from colmatch.lexical import Bm25Params, LexicalDoc, LexicalIndex, build_lexical_index, lexical_search
from colmatch.providers import (
    DEFAULT_PARALLELISM,
    EmbeddingProvider,
    GenerationProvider,
    GenerationRequest,
    bounded_map,
)
from colmatch.schema import ColumnMeta, ColumnRef, SchemaDef, TableMeta
from colmatch.vector import VectorDoc, VectorIndex, build_vector_index, vector_search

logger = logging.getLogger(__name__)

DEFAULT_FINAL_K = 10
DEFAULT_CONTEXT_BUDGET = 128_000
CHARS_PER_TOKEN = 4

ABLATION_FLAGS = (
    "query_enrichment",
    "document_enrichment",
    "name_expansion_prompt",
    "embedding_search",
    "fulltext_search",
    "table_selection",
)


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 50
    cosine_threshold: float = 0.5
    bm25_threshold: float = 1.0
    use_vector: bool = True
    use_lexical: bool = True

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if not (self.use_vector or self.use_lexical):
            raise ConfigError("at least one retrieval channel must be enabled")


@dataclass(frozen=True)
class AblationFlags:
    """Each flag is one removable pipeline component; all on is the full pipeline."""

    query_enrichment: bool = True
    document_enrichment: bool = True
    name_expansion_prompt: bool = True
    embedding_search: bool = True
    fulltext_search: bool = True
    table_selection: bool = True

    def without(self, flag: str) -> AblationFlags:
        if flag not in ABLATION_FLAGS:
            raise ConfigError(f"unknown ablation flag {flag!r}; choose from {', '.join(ABLATION_FLAGS)}")
        return dataclasses.replace(self, **{flag: False})

    def disabled(self) -> list[str]:
        return [name for name in ABLATION_FLAGS if not getattr(self, name)]


@dataclass(frozen=True)
class MatchConfig:
    enrichment: EnrichmentConfig = field(default_factory=EnrichmentConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    final_k: int = DEFAULT_FINAL_K
    parallelism: int = DEFAULT_PARALLELISM

    def effective_enrichment(self) -> EnrichmentConfig:
        return dataclasses.replace(
            self.enrichment,
            use_expansion_prompt=self.enrichment.use_expansion_prompt and self.ablation.name_expansion_prompt,
        )

    def effective_retrieval(self) -> RetrievalConfig:
        return dataclasses.replace(
            self.retrieval,
            use_vector=self.retrieval.use_vector and self.ablation.embedding_search,
            use_lexical=self.retrieval.use_lexical and self.ablation.fulltext_search,
        )


@dataclass(frozen=True)
class ScoredCandidate:
    target: ColumnRef
    best_lexical_score: float | None = None
    best_vector_similarity: float | None = None
    matched_names: frozenset[tuple[EnrichedName, EnrichedName]] = frozenset()

    def __post_init__(self) -> None:
        if self.best_lexical_score is None and self.best_vector_similarity is None:
            raise ValueError("a candidate needs at least one retrieval score")

    def retrieval_key(self) -> tuple[int, float, float]:
        """Larger is better: channels that found it, then similarity, then BM25."""
        channels = (self.best_lexical_score is not None) + (self.best_vector_similarity is not None)
        vec = self.best_vector_similarity if self.best_vector_similarity is not None else -math.inf
        lex = self.best_lexical_score if self.best_lexical_score is not None else -math.inf
        return (channels, vec, lex)


def by_retrieval_score(candidates: Sequence[ScoredCandidate]) -> list[ScoredCandidate]:
    ordered = sorted(candidates, key=lambda c: c.target)
    return sorted(ordered, key=lambda c: c.retrieval_key(), reverse=True)


@dataclass(frozen=True)
class RankedPrediction:
    source: ColumnRef
    ranked_targets: tuple[ColumnRef, ...]
    baseline: bool = False

    def __post_init__(self) -> None:
        if len(set(self.ranked_targets)) != len(self.ranked_targets):
            raise ValueError(f"duplicate targets in prediction for {self.source}")

    def top(self, k: int) -> tuple[ColumnRef, ...]:
        return self.ranked_targets[:k]


# ---------------------------------------------------------------------------
# indexing


@dataclass(frozen=True)
class TargetArtifacts:
    schema: SchemaDef
    enrichment: EnrichmentArtifact
    lexical: LexicalIndex
    vector: VectorIndex
    embedder_id: str
    document_enrichment: bool
    expansion_prompt: bool


def _index_docs(enrichment: EnrichmentArtifact) -> list[tuple[ColumnRef, EnrichedName]]:
    return [(col.ref, name) for col in enrichment.columns for name in col.names if name.tokens.tokens]


def build_lexical_from_enrichment(enrichment: EnrichmentArtifact, params: Bm25Params | None = None) -> LexicalIndex:
    docs = [LexicalDoc(i, ref, name) for i, (ref, name) in enumerate(_index_docs(enrichment))]
    return build_lexical_index(docs, params)


def build_vector_from_enrichment(enrichment: EnrichmentArtifact, embedder: EmbeddingProvider) -> VectorIndex:
    pairs = _index_docs(enrichment)
    vectors = embedder.embed([name.tokens.text for _, name in pairs])
    return build_vector_index(VectorDoc(i, ref, name, vec) for i, ((ref, name), vec) in enumerate(zip(pairs, vectors)))


def build_target_artifacts(
    target: SchemaDef,
    cfg: MatchConfig,
    llm: GenerationProvider,
    embedder: EmbeddingProvider,
    *,
    bm25: Bm25Params | None = None,
) -> TargetArtifacts:
    enrichment = enrich_schema(
        target,
        cfg.effective_enrichment(),
        llm,
        enabled=cfg.ablation.document_enrichment,
        parallelism=cfg.parallelism,
    )
    return TargetArtifacts(
        schema=target,
        enrichment=enrichment,
        lexical=build_lexical_from_enrichment(enrichment, bm25),
        vector=build_vector_from_enrichment(enrichment, embedder),
        embedder_id=embedder.provider_id,
        document_enrichment=cfg.ablation.document_enrichment,
        expansion_prompt=cfg.effective_enrichment().use_expansion_prompt,
    )


# ---------------------------------------------------------------------------
# querying


def retrieve_candidates(
    src: EnrichedColumn,
    lex: LexicalIndex | None,
    vec: VectorIndex | None,
    cfg: RetrievalConfig,
    embedder: EmbeddingProvider | None,
) -> list[ScoredCandidate]:
    """Search both channels with every source name and merge hits per target column."""
    names = [n for n in src.names if n.tokens.tokens]
    lexical: dict[ColumnRef, float] = {}
    vector: dict[ColumnRef, float] = {}
    matched: dict[ColumnRef, set[tuple[EnrichedName, EnrichedName]]] = {}

    if cfg.use_lexical and lex is not None:
        for name in names:
            for hit in lexical_search(lex, name.tokens, cfg.top_k, cfg.bm25_threshold):
                lexical[hit.target] = max(hit.score, lexical.get(hit.target, -math.inf))
                matched.setdefault(hit.target, set()).add((name, lex.docs[hit.matched_doc].name))
    if cfg.use_vector and vec is not None and names:
        if embedder is None:
            raise ConfigError("vector retrieval needs an embedding provider")
        queries = embedder.embed([n.tokens.text for n in names])
        for name, query in zip(names, queries):
            for hit in vector_search(vec, query, cfg.top_k, cfg.cosine_threshold):
                vector[hit.target] = max(hit.similarity, vector.get(hit.target, -math.inf))
                matched.setdefault(hit.target, set()).add((name, vec.docs[hit.matched_doc].name))

    candidates = [
        ScoredCandidate(
            target=ref,
            best_lexical_score=lexical.get(ref),
            best_vector_similarity=vector.get(ref),
            matched_names=frozenset(pairs),
        )
        for ref, pairs in matched.items()
    ]
    return by_retrieval_score(candidates)


def _ask_list(llm: GenerationProvider, prompt: str, tag: str, *, allow_empty: bool = False) -> list[str]:
    response = llm.generate(GenerationRequest(prompt=prompt))
    try:
        return prompts.parse_numbered_block(response, tag, allow_empty=allow_empty)
    except ParseError:
        pass
    response = llm.generate(GenerationRequest(prompt=prompt + prompts.REPAIR_INSTRUCTION))
    return prompts.parse_numbered_block(response, tag, allow_empty=allow_empty)


def select_tables(
    src_table: TableMeta,
    candidates: Sequence[ScoredCandidate],
    target_schema: SchemaDef,
    llm: GenerationProvider,
    src_column: ColumnMeta | None = None,
) -> list[ScoredCandidate]:
    """Keep candidates whose table the LLM judges pertinent. Fails open."""
    if not candidates:
        return []
    table_names = {c.target.table_name.lower() for c in candidates}
    tables = [t for t in target_schema.tables if t.name.lower() in table_names]
    column = src_column or src_table.columns[0]
    try:
        chosen = _ask_list(llm, prompts.build_table_selection_prompt(src_table, column, tables), "tables", allow_empty=True)
    except ParseError as exc:
        logger.warning("table selection for %s.%s unparseable (%s); keeping all candidates", src_table.name, column.name, exc)
        return list(candidates)
    selected = {name.strip().strip("`\"'").lower() for name in chosen} & table_names
    if not selected:
        return list(candidates)
    return [c for c in candidates if c.target.table_name.lower() in selected]


def presentation_order(source: ColumnRef, candidates: Sequence[ScoredCandidate]) -> list[ScoredCandidate]:
    """Shuffle seeded by the source column, so runs are reproducible without
    feeding the LLM the retrieval order."""
    seed = int.from_bytes(hashlib.sha256("|".join(source.key).encode("utf-8")).digest()[:8], "little")
    ordered = sorted(candidates, key=lambda c: c.target)
    random.Random(seed).shuffle(ordered)
    return ordered


def _target_names(ref: ColumnRef, target_enrichment: EnrichmentArtifact | None) -> list[str]:
    col = target_enrichment.get(ref) if target_enrichment is not None else None
    if col is None:
        return [ref.column_name]
    return [n.text for n in col.names]


def rank_candidates(
    src: EnrichedColumn,
    candidates: Sequence[ScoredCandidate],
    target_enrichment: EnrichmentArtifact | None,
    llm: GenerationProvider,
) -> RankedPrediction:
    fallback = [c.target for c in by_retrieval_score(candidates)]
    if len(candidates) <= 1:
        return RankedPrediction(src.ref, tuple(fallback))
    shown = presentation_order(src.ref, candidates)
    src_table = TableMeta(name=src.ref.table_name, description=src.table_description)
    prompt = prompts.build_ranking_prompt(
        src_table,
        src.meta,
        [n.text for n in src.names if n.origin is not Origin.ORIGINAL],
        [(c.target, _target_names(c.target, target_enrichment)) for c in shown],
    )
    try:
        items = _ask_list(llm, prompt, "ranking")
    except ParseError as exc:
        logger.warning("ranking for %s unparseable (%s); using retrieval order", src.ref, exc)
        return RankedPrediction(src.ref, tuple(fallback))
    pool = {c.target: c.target for c in candidates}
    ranked: list[ColumnRef] = []
    for ref in prompts.parse_column_refs(items):
        known = pool.get(ref)
        if known is not None and known not in ranked:
            ranked.append(known)
    ranked += [ref for ref in fallback if ref not in ranked]
    return RankedPrediction(src.ref, tuple(ranked))


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


def needle_in_the_stack(
    src: ColumnMeta,
    src_table: TableMeta,
    target_schema: SchemaDef,
    llm: GenerationProvider,
    *,
    top_k: int = DEFAULT_FINAL_K,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
) -> RankedPrediction:
    """Baseline: one prompt holding the whole target schema, no retrieval."""
    prompt = prompts.build_needle_prompt(src_table, src, target_schema, top_k)
    needed = estimate_tokens(prompt)
    if needed > context_budget:
        raise ContextBudgetExceededError(f"full-schema prompt needs ~{needed} tokens, budget is {context_budget}")
    try:
        items = _ask_list(llm, prompt, "ranking")
    except ParseError as exc:
        logger.warning("full-schema ranking for %s unparseable (%s); empty prediction", src.ref, exc)
        return RankedPrediction(src.ref, (), baseline=True)
    ranked: list[ColumnRef] = []
    for ref in prompts.parse_column_refs(items):
        if ref in target_schema and ref not in ranked:
            ranked.append(ref)
    return RankedPrediction(src.ref, tuple(ranked[:top_k]), baseline=True)


# ---------------------------------------------------------------------------
# whole-schema runs


@dataclass(frozen=True)
class ColumnFailure:
    source: ColumnRef
    error: str


@dataclass(frozen=True)
class MatchResult:
    predictions: tuple[RankedPrediction, ...]
    failures: tuple[ColumnFailure, ...] = ()


def _check_artifacts(target: TargetArtifacts, cfg: MatchConfig) -> None:
    if target.document_enrichment != cfg.ablation.document_enrichment:
        raise ConfigError("target indexes were built with a different document_enrichment setting")
    if target.document_enrichment and target.expansion_prompt != cfg.effective_enrichment().use_expansion_prompt:
        raise ConfigError("target indexes were built with a different name_expansion_prompt setting")


def match_column(
    table: TableMeta,
    col: ColumnMeta,
    target: TargetArtifacts,
    cfg: MatchConfig,
    llm: GenerationProvider,
    embedder: EmbeddingProvider,
) -> RankedPrediction:
    if cfg.ablation.query_enrichment:
        src = enrich_column(col, table, cfg.effective_enrichment(), llm)
    else:
        src = unenriched_column(col, table)
    candidates = retrieve_candidates(src, target.lexical, target.vector, cfg.effective_retrieval(), embedder)
    if not candidates:
        return RankedPrediction(col.ref, ())
    if cfg.ablation.table_selection:
        candidates = select_tables(table, candidates, target.schema, llm, col)
    prediction = rank_candidates(src, candidates, target.enrichment, llm)
    return RankedPrediction(col.ref, prediction.top(cfg.final_k))


def _run_per_column(source: SchemaDef, fn, parallelism: int) -> MatchResult:
    pairs = list(source.iter_columns())

    def guarded(pair: tuple[TableMeta, ColumnMeta]) -> RankedPrediction | ColumnFailure:
        table, col = pair
        try:
            return fn(table, col)
        except ColmatchError as exc:
            logger.error("matching %s failed: %s", col.ref, exc)
            return ColumnFailure(col.ref, f"{type(exc).__name__}: {exc}")

    outcomes = bounded_map(guarded, pairs, parallelism)
    predictions = []
    failures = []
    for (_, col), outcome in zip(pairs, outcomes):
        if isinstance(outcome, ColumnFailure):
            failures.append(outcome)
            predictions.append(RankedPrediction(col.ref, ()))
        else:
            predictions.append(outcome)
    return MatchResult(tuple(predictions), tuple(failures))


def match_schema(
    source: SchemaDef,
    target: TargetArtifacts,
    cfg: MatchConfig,
    llm: GenerationProvider,
    embedder: EmbeddingProvider,
) -> MatchResult:
    """One prediction per source column, in source-schema order. A failing
    column yields an empty prediction and a failure record."""
    cfg.effective_retrieval()  # validates that a channel is left
    _check_artifacts(target, cfg)
    return _run_per_column(
        source,
        lambda table, col: match_column(table, col, target, cfg, llm, embedder),
        cfg.parallelism,
    )


def run_needle_baseline(
    source: SchemaDef,
    target_schema: SchemaDef,
    llm: GenerationProvider,
    *,
    top_k: int = DEFAULT_FINAL_K,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    parallelism: int = DEFAULT_PARALLELISM,
) -> MatchResult:
    result = _run_per_column(
        source,
        lambda table, col: needle_in_the_stack(
            col, table, target_schema, llm, top_k=top_k, context_budget=context_budget
        ),
        parallelism,
    )
    predictions = tuple(dataclasses.replace(p, baseline=True) for p in result.predictions)
    return MatchResult(predictions, result.failures)
