"""Deterministic offline stand-ins for the LLM and embedding backends.

``MockLLM`` answers the package's own prompt templates by rule, driven by a
small lexicon (abbreviations, cross-vocabulary synonyms, concept groups).
``MockEmbedder`` builds each text vector from per-token pseudo-random unit
vectors seeded by SHA-256, so vectors are stable across processes and texts
that share tokens or concepts land close together.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

import numpy as np

from colmatch import prompts
from colmatch.normalize import tokens_of
from colmatch.providers import GenerationRequest, unit_normalize

DEFAULT_ATTENTION_SPAN = 15


@dataclass(frozen=True)
class Lexicon:
    abbreviations: dict[str, str] = field(default_factory=dict)
    phrases: dict[str, list[str]] = field(default_factory=dict)
    synonyms: dict[str, list[str]] = field(default_factory=dict)
    concepts: dict[str, str] = field(default_factory=dict)
    stopwords: frozenset[str] = frozenset()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Lexicon:
        concepts: dict[str, str] = {}
        for group in data.get("concepts", []):
            for word in group:
                concepts[word] = group[0]
        return cls(
            abbreviations=dict(data.get("abbreviations", {})),
            phrases={k: list(v) for k, v in data.get("phrases", {}).items()},
            synonyms={k: list(v) for k, v in data.get("synonyms", {}).items()},
            concepts=concepts,
            stopwords=frozenset(data.get("stopwords", [])),
        )

    @classmethod
    def default(cls) -> Lexicon:
        return _default_lexicon()

    def expand(self, tokens: Iterable[str]) -> list[str]:
        words: list[str] = []
        for tok in tokens:
            words.extend(self.abbreviations.get(tok, tok).split())
        return words

    def content_words(self, text: str) -> list[str]:
        return [t for t in tokens_of(text) if t not in self.stopwords]

    def concept_set(self, tokens: Iterable[str]) -> set[str]:
        return {self.concepts.get(t, t) for t in tokens if t not in self.stopwords}


@lru_cache(maxsize=1)
def _default_lexicon() -> Lexicon:
    text = resources.files("colmatch.data").joinpath("mock_lexicon.json").read_text(encoding="utf-8")
    return Lexicon.from_dict(json.loads(text))


def _section(prompt: str, header: str) -> str:
    """Text after ``### header`` up to the next ``###`` heading."""
    start = prompt.find(f"### {header}")
    if start < 0:
        return ""
    body = prompt[start + len(header) + 4 :]
    end = body.find("\n### ")
    return body if end < 0 else body[:end]


def _field(text: str, label: str) -> str:
    match = re.search(rf"^{re.escape(label)}: ?(.*)$", text, re.MULTILINE)
    if not match:
        return ""
    value = match.group(1).strip()
    return "" if value == prompts.NO_DESCRIPTION else value


def _numbered(tag: str, items: Sequence[str], reasoning: str) -> str:
    body = "\n".join(f"{i}. {item}" for i, item in enumerate(items, start=1))
    return f"Reasoning: {reasoning}\n<{tag}>\n{body}\n</{tag}>" if body else f"Reasoning: {reasoning}\n<{tag}>\n</{tag}>"


def _jaccard(a: set[str], b: set[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


class MockLLM:
    """Rule-based responder for every prompt the pipeline sends.

    ``attention_span`` caps how many listed candidates the mock actually reads
    when ranking; the rest keep their listed order. This models a model that
    loses track of long candidate lists.
    """

    provider_id = "mock-llm-v1"

    def __init__(self, lexicon: Lexicon | None = None, *, attention_span: int = DEFAULT_ATTENTION_SPAN):
        self.lexicon = lexicon or Lexicon.default()
        self.attention_span = attention_span
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, req: GenerationRequest) -> str:
        with self._lock:
            self.calls += 1
        handler = {
            prompts.TASK_EXPANSION: self._expansion,
            prompts.TASK_CROSS_TERMINOLOGY: self._cross_terminology,
            prompts.TASK_TABLE_SELECTION: self._table_selection,
            prompts.TASK_RANKING: self._ranking,
            prompts.TASK_NEEDLE: self._needle,
        }.get(prompts.task_of(req.prompt) or "")
        if handler is None:
            return "I can only help with schema matching prompts."
        return handler(req.prompt)

    @staticmethod
    def _requested_count(prompt: str) -> int:
        match = re.search(r"exactly (\d+) names?", prompt)
        return int(match.group(1)) if match else 3

    def _expansion(self, prompt: str) -> str:
        inp = _section(prompt, "Input")
        column = _field(inp, "Column name")
        description = _field(inp, "Column description")
        expanded = self.lexicon.expand(tokens_of(column))
        names = [" ".join(expanded)]
        table_concepts = self.lexicon.concept_set(tokens_of(_field(inp, "Table name")))
        # description words that only restate the table's entity are left out
        desc_words = [
            w for w in self.lexicon.content_words(description) if self.lexicon.concepts.get(w, w) not in table_concepts
        ][:3]
        if desc_words:
            names.append(" ".join(desc_words))
        # same name again in camelCase; real models repeat themselves like this
        names.append("".join(w.capitalize() for w in expanded))
        names = [n for n in names if n.strip()][: self._requested_count(prompt)]
        return _numbered("names", names, f"expanded the abbreviations in {column}")

    def _cross_terminology(self, prompt: str) -> str:
        inp = _section(prompt, "Input")
        column = _field(inp, "Column name")
        forbidden = {w.strip() for w in _field(prompt, "Forbidden words").split(",") if w.strip()}
        count = self._requested_count(prompt)
        expanded = self.lexicon.expand(tokens_of(column))
        phrase = " ".join(expanded)
        names: list[str] = []
        if phrase in self.lexicon.phrases:
            names = list(self.lexicon.phrases[phrase])
        else:
            for i in range(count):
                words = []
                for word in expanded:
                    alts = [a for a in self.lexicon.synonyms.get(word, []) if not set(tokens_of(a)) & forbidden]
                    words.append(alts[i % len(alts)] if alts else word)
                names.append(" ".join(words))
        unique = list(dict.fromkeys(n for n in names if n.strip()))[:count]
        return _numbered("names", unique, f"looked for other vocabulary for {column}")

    def _table_selection(self, prompt: str) -> str:
        inp = _section(prompt, "Input")
        source = self.lexicon.concept_set(
            tokens_of(_field(inp, "Source table name")) + tokens_of(_field(inp, "Source table description"))
        )
        scored = []
        for line in _section(prompt, "Target tables").splitlines():
            match = re.match(r"^- ([^:]+): ?(.*)$", line.strip())
            if not match:
                continue
            name, desc = match.group(1).strip(), match.group(2)
            if desc == prompts.NO_DESCRIPTION:
                desc = ""
            concepts = self.lexicon.concept_set(tokens_of(name) + tokens_of(desc))
            scored.append((len(source & concepts), name))
        best = max((score for score, _ in scored), default=0)
        chosen = [name for score, name in scored if best > 0 and score == best]
        return _numbered("tables", chosen, "kept the tables that describe the same entity")

    def _rank(self, source: set[str], candidates: list[tuple[str, set[str]]]) -> list[str]:
        read, unread = candidates[: self.attention_span], candidates[self.attention_span :]
        order = sorted(range(len(read)), key=lambda i: (-_jaccard(source, read[i][1]), i))
        return [read[i][0] for i in order] + [ref for ref, _ in unread]

    def _ranking(self, prompt: str) -> str:
        src = _section(prompt, "Source column")
        source_tokens = tokens_of(_field(src, "Column name"))
        for name in _field(src, "Alternative names").split(";"):
            source_tokens += tokens_of(name)
        candidates = []
        for line in _section(prompt, "Candidates").splitlines():
            match = re.match(r"^- (\S+) \| names: (.*)$", line.strip())
            if not match:
                continue
            ref, names = match.group(1), match.group(2)
            cand_tokens = tokens_of(ref.partition(".")[2])
            for name in names.split(";"):
                cand_tokens += tokens_of(name)
            candidates.append((ref, self.lexicon.concept_set(cand_tokens)))
        ranked = self._rank(self.lexicon.concept_set(source_tokens), candidates)
        return _numbered("ranking", ranked, "ordered by name similarity")

    def _needle(self, prompt: str) -> str:
        src = _section(prompt, "Source column")
        source = self.lexicon.concept_set(
            tokens_of(_field(src, "Column name")) + tokens_of(_field(src, "Column description"))
        )
        candidates = []
        for line in _section(prompt, "Target schema").splitlines():
            match = re.match(r"^- (\S+?): ?(.*)$", line.strip())
            if not match:
                continue
            ref, desc = match.group(1), match.group(2)
            if desc == prompts.NO_DESCRIPTION:
                desc = ""
            candidates.append((ref, self.lexicon.concept_set(tokens_of(ref.partition(".")[2]) + tokens_of(desc))))
        top = re.search(r"the (\d+) best target columns", prompt)
        k = int(top.group(1)) if top else 10
        ranked = self._rank(source, candidates)[:k]
        return _numbered("ranking", ranked, "searched the whole schema")


def _seed(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


class MockEmbedder:
    """Bag-of-token embedding: each token contributes a fixed pseudo-random unit
    vector, blended with its concept-group vector when the lexicon has one."""

    def __init__(self, dimension: int = 384, lexicon: Lexicon | None = None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.lexicon = lexicon or Lexicon.default()
        self.provider_id = f"mock-embed-v1:{dimension}"
        self.calls = 0
        self._token_cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _unit(self, label: str) -> np.ndarray:
        vec = np.random.default_rng(_seed(label)).standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)

    def token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        vec = self._unit(f"token:{token}")
        concept = self.lexicon.concepts.get(token)
        if concept is not None:
            vec = vec + self._unit(f"concept:{concept}")
            vec = vec / np.linalg.norm(vec)
        with self._lock:
            self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed needs at least one text")
        with self._lock:
            self.calls += 1
        rows = []
        for text in texts:
            tokens = tokens_of(text) or ("<empty>",)
            rows.append(np.sum([self.token_vector(t) for t in tokens], axis=0))
        return unit_normalize(np.asarray(rows))
