"""In-memory BM25 index over enriched target names (one document per name).

Scoring is the Lucene variant::

    idf(t)      = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
    score(q, d) = sum over query tokens t of
                  idf(t) * tf(t, d) * (k1 + 1) / (tf(t, d) + k1 * (1 - b + b * |d| / avgdl))

A repeated query token contributes once per occurrence. Only documents that
contain at least one query token are hits.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from colmatch.enrich import EnrichedName
from colmatch.errors import EmptyCorpusError, SchemaError
from colmatch.normalize import TokenizedName
from colmatch.schema import ColumnRef

LEXICAL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class LexicalDoc:
    doc_id: int
    target: ColumnRef
    name: EnrichedName

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.name.tokens.tokens


@dataclass(frozen=True)
class LexicalHit:
    target: ColumnRef
    score: float
    matched_doc: int


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


@dataclass
class LexicalIndex:
    params: Bm25Params
    docs: tuple[LexicalDoc, ...]
    doc_len: tuple[int, ...] = field(init=False)
    avgdl: float = field(init=False)
    df: dict[str, int] = field(init=False)
    postings: dict[str, list[tuple[int, int]]] = field(init=False, repr=False)
    idf: dict[str, float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.docs:
            raise EmptyCorpusError("lexical index needs at least one document")
        for expected, doc in enumerate(self.docs):
            if doc.doc_id != expected:
                raise SchemaError(f"doc ids must be dense and ordered; got {doc.doc_id} at position {expected}")
        self.doc_len = tuple(len(d.tokens) for d in self.docs)
        self.avgdl = sum(self.doc_len) / len(self.docs)
        self.df = {}
        self.postings = {}
        for doc in self.docs:
            for term, tf in Counter(doc.tokens).items():
                self.df[term] = self.df.get(term, 0) + 1
                self.postings.setdefault(term, []).append((doc.doc_id, tf))
        n = len(self.docs)
        self.idf = {term: bm25_idf(n, df) for term, df in self.df.items()}

    def __len__(self) -> int:
        return len(self.docs)

    def term_weight(self, term: str, tf: int, doc_id: int) -> float:
        k1, b = self.params.k1, self.params.b
        norm = 1.0 - b + b * (self.doc_len[doc_id] / self.avgdl if self.avgdl > 0 else 0.0)
        return self.idf[term] * tf * (k1 + 1.0) / (tf + k1 * norm)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "colmatch-lexical-index",
            "format_version": LEXICAL_FORMAT_VERSION,
            "params": {"k1": self.params.k1, "b": self.params.b},
            "stats": {"n_docs": len(self.docs), "avgdl": self.avgdl, "df": dict(sorted(self.df.items()))},
            "docs": [{"doc_id": d.doc_id, "target": d.target.to_dict(), "name": d.name.to_dict()} for d in self.docs],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LexicalIndex:
        if data.get("format") != "colmatch-lexical-index" or data.get("format_version") != LEXICAL_FORMAT_VERSION:
            raise SchemaError(f"not a version {LEXICAL_FORMAT_VERSION} lexical index")
        docs = tuple(
            LexicalDoc(d["doc_id"], ColumnRef.from_dict(d["target"]), EnrichedName.from_dict(d["name"]))
            for d in data["docs"]
        )
        index = build_lexical_index(docs, Bm25Params(**data["params"]))
        if index.df != data["stats"]["df"] or len(index.docs) != data["stats"]["n_docs"]:
            raise SchemaError("lexical index statistics do not match its documents")
        return index


def build_lexical_index(docs: Iterable[LexicalDoc], params: Bm25Params | None = None) -> LexicalIndex:
    return LexicalIndex(params=params or Bm25Params(), docs=tuple(docs))


def lexical_search(
    index: LexicalIndex,
    query: TokenizedName | Sequence[str],
    top_k: int = 50,
    threshold: float = 1.0,
) -> list[LexicalHit]:
    tokens = query.tokens if isinstance(query, TokenizedName) else tuple(query)
    scores: dict[int, float] = {}
    for term in tokens:
        for doc_id, tf in index.postings.get(term, ()):
            scores[doc_id] = scores.get(doc_id, 0.0) + index.term_weight(term, tf, doc_id)
    ranked = sorted(
        ((doc_id, score) for doc_id, score in scores.items() if score >= threshold),
        key=lambda item: (-item[1], item[0]),
    )
    return [LexicalHit(index.docs[doc_id].target, score, doc_id) for doc_id, score in ranked[:top_k]]
