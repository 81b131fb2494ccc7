"""Schema matching with LLM-enriched column names and hybrid retrieval."""

from colmatch.enrich import EnrichmentConfig, enrich_column, enrich_schema
from colmatch.evaluation import NaPolicy, build_report, hit_rate_at_k, recall_at_k
from colmatch.lexical import build_lexical_index, lexical_search
from colmatch.normalize import normalize_name
from colmatch.pipeline import (
    AblationFlags,
    MatchConfig,
    RankedPrediction,
    RetrievalConfig,
    build_target_artifacts,
    match_schema,
    run_needle_baseline,
)
from colmatch.schema import ColumnRef, SchemaDef, load_ground_truth, load_schema
from colmatch.vector import build_vector_index, vector_search

__version__ = "0.1.0"

__all__ = [
    "AblationFlags",
    "ColumnRef",
    "EnrichmentConfig",
    "MatchConfig",
    "NaPolicy",
    "RankedPrediction",
    "RetrievalConfig",
    "SchemaDef",
    "build_lexical_index",
    "build_report",
    "build_target_artifacts",
    "build_vector_index",
    "enrich_column",
    "enrich_schema",
    "hit_rate_at_k",
    "lexical_search",
    "load_ground_truth",
    "load_schema",
    "match_schema",
    "normalize_name",
    "recall_at_k",
    "run_needle_baseline",
    "vector_search",
]
