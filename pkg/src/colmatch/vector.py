"""Exact (flat) cosine-similarity index over embedded target names."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from colmatch.enrich import EnrichedName
from colmatch.errors import DimensionMismatchError, EmptyCorpusError, SchemaError
from colmatch.providers import unit_normalize
from colmatch.schema import ColumnRef

VECTOR_FORMAT_VERSION = 1
UNIT_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class VectorDoc:
    doc_id: int
    target: ColumnRef
    name: EnrichedName
    vector: np.ndarray


@dataclass(frozen=True)
class VectorHit:
    target: ColumnRef
    similarity: float
    matched_doc: int


@dataclass(eq=False)
class VectorIndex:
    docs: tuple[VectorDoc, ...]
    matrix: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.docs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "colmatch-vector-index",
            "format_version": VECTOR_FORMAT_VERSION,
            "dimension": self.dimension,
            "docs": [{"doc_id": d.doc_id, "target": d.target.to_dict(), "name": d.name.to_dict()} for d in self.docs],
            # float repr round-trips exactly through JSON
            "vectors": [[float(x) for x in row] for row in self.matrix],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> VectorIndex:
        if data.get("format") != "colmatch-vector-index" or data.get("format_version") != VECTOR_FORMAT_VERSION:
            raise SchemaError(f"not a version {VECTOR_FORMAT_VERSION} vector index")
        vectors = np.asarray(data["vectors"], dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] != data["dimension"]:
            raise DimensionMismatchError("stored vectors do not match the declared dimension")
        if len(vectors) != len(data["docs"]) or len(vectors) == 0:
            raise SchemaError("vector index needs one stored vector per document")
        if np.any(np.abs(np.linalg.norm(vectors, axis=1) - 1.0) > UNIT_TOLERANCE):
            raise SchemaError("stored vectors are not unit-normalized")
        # stored rows are already normalized; normalizing again would move the last bits
        vectors.setflags(write=False)
        docs = []
        for expected, (d, vec) in enumerate(zip(data["docs"], vectors)):
            if d["doc_id"] != expected:
                raise SchemaError(f"doc ids must be dense and ordered; got {d['doc_id']} at position {expected}")
            docs.append(VectorDoc(d["doc_id"], ColumnRef.from_dict(d["target"]), EnrichedName.from_dict(d["name"]), vec))
        return cls(docs=tuple(docs), matrix=vectors)


def build_vector_index(docs: Iterable[VectorDoc]) -> VectorIndex:
    docs = list(docs)
    if not docs:
        raise EmptyCorpusError("vector index needs at least one document")
    dims = {np.asarray(d.vector).shape for d in docs}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise DimensionMismatchError(f"mixed vector shapes: {sorted(dims)}")
    for expected, doc in enumerate(docs):
        if doc.doc_id != expected:
            raise SchemaError(f"doc ids must be dense and ordered; got {doc.doc_id} at position {expected}")
    matrix = unit_normalize(np.stack([np.asarray(d.vector, dtype=np.float64) for d in docs]))
    matrix.setflags(write=False)
    stored = tuple(VectorDoc(d.doc_id, d.target, d.name, row) for d, row in zip(docs, matrix))
    return VectorIndex(docs=stored, matrix=matrix)


def vector_search(
    index: VectorIndex,
    query: np.ndarray | Sequence[float],
    top_k: int = 50,
    threshold: float = 0.5,
) -> list[VectorHit]:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != index.dimension:
        raise DimensionMismatchError(f"query has shape {q.shape}, index dimension is {index.dimension}")
    q = unit_normalize(q)[0]
    sims = index.matrix @ q
    keep = np.flatnonzero(sims >= threshold)
    # lexsort: last key is primary -> similarity descending, then doc id ascending
    order = keep[np.lexsort((keep, -sims[keep]))][:top_k]
    return [VectorHit(index.docs[i].target, float(sims[i]), int(i)) for i in order]
