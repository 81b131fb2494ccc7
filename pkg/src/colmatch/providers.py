"""Text-generation and embedding backends, the on-disk response cache, and retries."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Protocol, TypeVar, runtime_checkable

import httpx
import numpy as np

from colmatch.errors import (
    DimensionMismatchError,
    NormalizationError,
    ProviderRefusalError,
    ProviderTimeoutError,
    TransportError,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_MAX_OUTPUT_LENGTH = 2048
DEFAULT_PARALLELISM = 4
RETRY_ATTEMPTS = 3


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.0
    max_output_length: int = DEFAULT_MAX_OUTPUT_LENGTH

    def __post_init__(self) -> None:
        if self.max_output_length < 1:
            raise ValueError("max_output_length must be positive")


@runtime_checkable
class GenerationProvider(Protocol):
    provider_id: str

    def generate(self, req: GenerationRequest) -> str: ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    provider_id: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return an ``(len(texts), dimension)`` array of unit-norm rows."""
        ...


def unit_normalize(vectors: np.ndarray) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    norms = np.linalg.norm(arr, axis=1)
    if np.any(~np.isfinite(norms)) or np.any(norms == 0.0):
        raise NormalizationError("cannot unit-normalize a zero or non-finite vector")
    return arr / norms[:, None]


def bounded_map(fn: Callable[[T], R], items: Sequence[T], workers: int = DEFAULT_PARALLELISM) -> list[R]:
    """Map with at most ``workers`` threads; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def with_retries(
    call: Callable[[], T],
    *,
    attempts: int = RETRY_ATTEMPTS,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``call``, retrying transport-class errors with exponential backoff."""
    for attempt in range(attempts):
        try:
            return call()
        except TransportError as exc:
            if attempt == attempts - 1:
                raise
            delay = backoff * (2**attempt)
            logger.warning("transport error (%s); retry %d/%d in %.2fs", exc, attempt + 1, attempts - 1, delay)
            sleep(delay)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# cache


def cache_key(provider_id: str, payload: Any) -> str:
    canonical = json.dumps({"provider": provider_id, "request": payload}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed store of provider responses.

    With ``directory=None`` entries live in memory only. Writes are atomic and
    serialized per key, so concurrent workers may share one cache.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, Any] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        assert self.directory is not None
        return self.directory / key[:2] / f"{key}.json"

    def lock_for(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def get(self, key: str) -> Any | None:
        value = self._memory.get(key)
        if value is None and self.directory is not None:
            path = self._path(key)
            if path.exists():
                value = json.loads(path.read_text(encoding="utf-8"))["value"]
                self._memory[key] = value
        with self._guard:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def put(self, key: str, value: Any) -> None:
        self._memory[key] = value
        if self.directory is None:
            return
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump({"key": key, "value": value}, handle)
        os.replace(tmp, path)


class CachedGenerator:
    def __init__(self, provider: GenerationProvider, cache: ResponseCache):
        self.provider = provider
        self.cache = cache
        self.provider_id = provider.provider_id

    def generate(self, req: GenerationRequest) -> str:
        key = cache_key(self.provider_id, asdict(req))
        with self.cache.lock_for(key):
            cached = self.cache.get(key)
            if cached is not None:
                return cached
            text = self.provider.generate(req)
            self.cache.put(key, text)
            return text


class CachedEmbedder:
    """Per-text embedding cache; only uncached texts reach the provider, in one batch."""

    def __init__(self, provider: EmbeddingProvider, cache: ResponseCache):
        self.provider = provider
        self.cache = cache
        self.provider_id = provider.provider_id
        self.dimension = provider.dimension

    def _key(self, text: str) -> str:
        return cache_key(self.provider_id, {"embed": text, "dimension": self.dimension})

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed needs at least one text")
        rows: list[Any] = [self.cache.get(self._key(t)) for t in texts]
        missing = sorted({t for t, row in zip(texts, rows) if row is None})
        if missing:
            fresh = self.provider.embed(missing)
            by_text = dict(zip(missing, fresh))
            for text, vec in by_text.items():
                self.cache.put(self._key(text), [float(x) for x in vec])
            rows = [row if row is not None else by_text[t] for t, row in zip(texts, rows)]
        return unit_normalize(np.asarray(rows, dtype=np.float64))


# ---------------------------------------------------------------------------
# HTTP backends (OpenAI-compatible chat-completions and embeddings APIs)


def _raise_for_status(response: httpx.Response) -> None:
    if response.status_code == 429 or response.status_code >= 500:
        raise TransportError(f"HTTP {response.status_code} from {response.request.url}")
    if response.status_code >= 400:
        raise ProviderRefusalError(f"HTTP {response.status_code} from {response.request.url}: {response.text[:200]}")


class _HttpBackend:
    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str,
        *,
        timeout: float = 60.0,
        attempts: int = RETRY_ATTEMPTS,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.attempts = attempts
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = {"Authorization": f"Bearer {api_key}"}

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        def call() -> dict[str, Any]:
            try:
                response = self._client.post(f"{self.endpoint}{path}", json=payload, headers=self._headers)
            except httpx.TimeoutException as exc:
                raise ProviderTimeoutError(f"timeout calling {self.endpoint}{path}") from exc
            except httpx.TransportError as exc:
                raise TransportError(f"cannot reach {self.endpoint}{path}: {exc}") from exc
            _raise_for_status(response)
            return response.json()

        return with_retries(call, attempts=self.attempts, backoff=self.backoff)


class HttpChatProvider(_HttpBackend):
    @property
    def provider_id(self) -> str:
        return f"http-chat:{self.model}"

    def generate(self, req: GenerationRequest) -> str:
        body = self._post(
            "/chat/completions",
            {
                "model": self.model,
                "messages": [{"role": "user", "content": req.prompt}],
                "temperature": req.temperature,
                "max_tokens": req.max_output_length,
            },
        )
        try:
            choice = body["choices"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderRefusalError(f"malformed completion response: {str(body)[:200]}") from exc
        content = (choice.get("message") or {}).get("content")
        if choice.get("finish_reason") == "content_filter" or not content:
            raise ProviderRefusalError(f"provider returned no content (finish_reason={choice.get('finish_reason')})")
        return content


class HttpEmbeddingProvider(_HttpBackend):
    def __init__(self, endpoint: str, model: str, api_key: str, *, dimension: int, batch_size: int = 64, **kwargs: Any):
        super().__init__(endpoint, model, api_key, **kwargs)
        self.dimension = dimension
        self.batch_size = batch_size

    @property
    def provider_id(self) -> str:
        return f"http-embed:{self.model}:{self.dimension}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed needs at least one text")
        rows: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start : start + self.batch_size])
            body = self._post("/embeddings", {"model": self.model, "input": batch})
            data = sorted(body.get("data", []), key=lambda item: item.get("index", 0))
            if len(data) != len(batch):
                raise ProviderRefusalError(f"expected {len(batch)} embeddings, got {len(data)}")
            rows.extend(item["embedding"] for item in data)
        lengths = {len(row) for row in rows}
        if lengths != {self.dimension}:
            raise DimensionMismatchError(f"provider returned dimensions {sorted(lengths)}, configured {self.dimension}")
        return unit_normalize(np.asarray(rows, dtype=np.float64))

