"""On-disk index artifacts for one target schema and one index configuration.

Layout under ``<artifact_dir>/index/<hash12>/``::

    enrichment.json      enriched names per target column
    lexical_index.json   BM25 parameters, vocabulary statistics, doc table
    vector_index.json    dimension, doc table, vectors

Each file carries the full index-config hash; loading checks it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from colmatch.enrich import EnrichmentArtifact
from colmatch.errors import StaleArtifactError
from colmatch.lexical import LexicalIndex
from colmatch.manifest import canonical_json, sha256_file
from colmatch.pipeline import TargetArtifacts
from colmatch.schema import SchemaDef
from colmatch.vector import VectorIndex

ENRICHMENT_FILE = "enrichment.json"
LEXICAL_FILE = "lexical_index.json"
VECTOR_FILE = "vector_index.json"
ARTIFACT_FILES = (ENRICHMENT_FILE, LEXICAL_FILE, VECTOR_FILE)


def index_dir(artifact_dir: Path, index_hash: str) -> Path:
    return Path(artifact_dir) / "index" / index_hash[:12]


def _stamp(data: dict[str, Any], index_hash: str) -> dict[str, Any]:
    return {**data, "index_config_hash": index_hash}


def save_target_artifacts(directory: Path, art: TargetArtifacts, index_hash: str) -> dict[str, str]:
    directory.mkdir(parents=True, exist_ok=True)
    enrichment = _stamp(art.enrichment.to_dict(), index_hash)
    enrichment["document_enrichment"] = art.document_enrichment
    enrichment["expansion_prompt"] = art.expansion_prompt
    vector = _stamp(art.vector.to_dict(), index_hash)
    vector["embedder_id"] = art.embedder_id
    payloads = {
        ENRICHMENT_FILE: enrichment,
        LEXICAL_FILE: _stamp(art.lexical.to_dict(), index_hash),
        VECTOR_FILE: vector,
    }
    for name, payload in payloads.items():
        (directory / name).write_text(canonical_json(payload), encoding="utf-8")
    return artifact_hashes(directory)


def artifact_hashes(directory: Path) -> dict[str, str]:
    return {name: sha256_file(directory / name) for name in ARTIFACT_FILES}


def artifacts_present(directory: Path) -> bool:
    return all((directory / name).exists() for name in ARTIFACT_FILES)


def load_target_artifacts(directory: Path, target: SchemaDef, index_hash: str) -> TargetArtifacts:
    if not artifacts_present(directory):
        raise StaleArtifactError(
            f"no index artifacts for this configuration in {directory}; run `colmatch index` or pass --rebuild"
        )
    raw = {name: json.loads((directory / name).read_text(encoding="utf-8")) for name in ARTIFACT_FILES}
    for name, data in raw.items():
        if data.get("index_config_hash") != index_hash:
            raise StaleArtifactError(f"{directory / name} was built with a different configuration; pass --rebuild")
    enrichment_data = raw[ENRICHMENT_FILE]
    if enrichment_data.get("schema_hash") != target.content_hash():
        raise StaleArtifactError(f"{directory} was built from a different target schema; pass --rebuild")
    enrichment_path = directory / ENRICHMENT_FILE
    return TargetArtifacts(
        schema=target,
        enrichment=EnrichmentArtifact.load(enrichment_path, target),
        lexical=LexicalIndex.from_dict(raw[LEXICAL_FILE]),
        vector=VectorIndex.from_dict(raw[VECTOR_FILE]),
        embedder_id=raw[VECTOR_FILE]["embedder_id"],
        document_enrichment=bool(enrichment_data["document_enrichment"]),
        expansion_prompt=bool(enrichment_data["expansion_prompt"]),
    )
