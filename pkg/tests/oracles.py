"""Independent brute-force references used by unit and acceptance tests.

Each oracle recomputes its quantity from the raw inputs by exhaustive
enumeration, without sharing code paths with the package.
"""

from __future__ import annotations

import math
import random

import numpy as np

from colmatch.enrich import EnrichedName, Origin
from colmatch.lexical import LexicalDoc
from colmatch.normalize import TokenizedName
from colmatch.schema import ColumnRef


def bm25_brute_force(docs: list[list[str]], query: list[str], k1: float = 1.2, b: float = 0.75):
    """(doc_id, score) for every doc with score >= 0 that contains a query token,
    sorted by score descending then doc_id."""
    n = len(docs)
    avgdl = sum(len(d) for d in docs) / n
    out = []
    for doc_id, doc in enumerate(docs):
        if not set(query) & set(doc):
            continue
        score = 0.0
        for term in query:
            tf = doc.count(term)
            if tf == 0:
                continue
            df = sum(1 for d in docs if term in d)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            score += idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * len(doc) / avgdl))
        out.append((doc_id, score))
    out.sort(key=lambda item: (-item[1], item[0]))
    return out


def cosine_brute_force(vectors: np.ndarray, query: np.ndarray):
    """(doc_id, cosine) for every row, sorted by cosine descending then doc_id."""
    out = []
    qn = math.sqrt(sum(float(x) * float(x) for x in query))
    for doc_id, row in enumerate(vectors):
        rn = math.sqrt(sum(float(x) * float(x) for x in row))
        dot = sum(float(a) * float(c) for a, c in zip(row, query))
        out.append((doc_id, dot / (rn * qn)))
    out.sort(key=lambda item: (-item[1], item[0]))
    return out


def hit_rate_recount(preds: dict, gt: dict, k: int) -> float:
    """preds: source -> ranked list; gt: source -> set. NA sources excluded."""
    scored = [s for s in preds if gt[s]]
    hits = 0
    for s in scored:
        if any(t in gt[s] for t in preds[s][:k]):
            hits += 1
    return hits / len(scored)


def recall_recount(preds: dict, gt: dict, k: int) -> float:
    scored = [s for s in preds if gt[s]]
    total = 0.0
    for s in scored:
        found = sum(1 for t in gt[s] if t in preds[s][:k])
        total += found / len(gt[s])
    return total / len(scored)


def name(tokens, origin=Origin.ORIGINAL) -> EnrichedName:
    text = " ".join(tokens)
    return EnrichedName(text=text, tokens=TokenizedName(text, tuple(tokens)), origin=origin, position=1)


def random_corpus(rng: random.Random, max_docs: int = 200, vocab_size: int = 50):
    vocab = [f"w{chr(97 + i % 26)}{'x' * (i // 26)}" for i in range(rng.randint(2, vocab_size))]
    vocab = ["".join(ch for ch in w if ch.isalpha()) for w in vocab]
    n_docs = rng.randint(1, max_docs)
    docs = [[rng.choice(vocab) for _ in range(rng.randint(1, 6))] for _ in range(n_docs)]
    lexical_docs = [LexicalDoc(i, ColumnRef("T", f"c{i}"), name(d)) for i, d in enumerate(docs)]
    query = [rng.choice(vocab) for _ in range(rng.randint(1, 5))]
    return docs, lexical_docs, query
