"""Document grounding: chunked embedding store with exact cosine search,
plus a web-search interface with an offline stub.

The default embedder is deterministic feature hashing (dimension 256,
unit-normalized), so the whole retrieval path runs offline. The store
logic, not the embedding model, is the contract here; an external
embedding service can be dropped in behind the same interface.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import OceanQueryError


class EmptyDocument(OceanQueryError):
    code = "EmptyDocument"


class EmptyStore(OceanQueryError):
    code = "EmptyStore"


class ProviderUnavailable(OceanQueryError):
    code = "ProviderUnavailable"


@dataclass(frozen=True)
class DocChunk:
    doc_id: str
    chunk_index: int
    text: str
    embedding: tuple
    title: str = ""
    year: Optional[int] = None
    origin: str = ""

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "text": self.text,
            "embedding": list(self.embedding),
            "title": self.title,
            "year": self.year,
            "origin": self.origin,
        }

    @staticmethod
    def from_dict(d: dict) -> "DocChunk":
        return DocChunk(
            d["doc_id"], d["chunk_index"], d["text"], tuple(d["embedding"]),
            d.get("title", ""), d.get("year"), d.get("origin", ""),
        )


_TOKEN = re.compile(r"[a-z0-9]+")


class HashingEmbedder:
    """Deterministic bag-of-words feature hashing, unit-normalized."""

    def __init__(self, dimension: int = 256):
        self.dimension = dimension

    def embed(self, text: str) -> tuple:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            h = int.from_bytes(hashlib.md5(token.encode("utf-8")).digest()[:8], "big")
            sign = 1.0 if (h >> 8) & 1 else -1.0
            vec[h % self.dimension] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return tuple(float(x) for x in vec)


def chunk_windows(length: int, chunk_size: int, overlap: int) -> list:
    """Window start offsets for chunking ``length`` characters."""
    if chunk_size <= overlap or overlap < 0:
        raise ValueError("requires chunk_size > overlap >= 0")
    step = chunk_size - overlap
    starts = [0]
    while starts[-1] + step < length:
        starts.append(starts[-1] + step)
    return starts


class VectorStore:
    """In-memory chunk store with exact cosine top-k search.

    Reads are fully concurrent; ingestion takes the writer lock and
    replaces any prior chunks for the same document id.
    """

    def __init__(self, embedder: Optional[HashingEmbedder] = None):
        self.embedder = embedder or HashingEmbedder()
        self._chunks: list = []
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._chunks)

    def ingest(self, doc_id: str, text: str, *, title: str = "", year: Optional[int] = None,
               origin: str = "", chunk_size: int = 400, overlap: int = 100) -> int:
        if not text.strip():
            raise EmptyDocument(f"document {doc_id!r} is empty")
        chunks = []
        for i, start in enumerate(chunk_windows(len(text), chunk_size, overlap)):
            piece = text[start : start + chunk_size]
            chunks.append(
                DocChunk(
                    doc_id=doc_id,
                    chunk_index=i,
                    text=piece,
                    embedding=self.embedder.embed(piece),
                    title=title,
                    year=year,
                    origin=origin,
                )
            )
        with self._write_lock:
            kept = [c for c in self._chunks if c.doc_id != doc_id]
            self._chunks = kept + chunks
        return len(chunks)

    def search(self, query: str, k: int = 4) -> list:
        """Top-k (chunk, cosine score), descending; ties break by
        (doc_id, chunk_index)."""
        chunks = self._chunks
        if not chunks:
            raise EmptyStore("vector store is empty")
        q = np.array(self.embedder.embed(query))
        scored = [
            (float(np.dot(q, np.array(c.embedding))), c) for c in chunks
        ]
        scored.sort(key=lambda sc: (-sc[0], sc[1].doc_id, sc[1].chunk_index))
        return [(c, s) for s, c in scored[:k]]

    def save(self, path):
        payload = {"version": 1, "dimension": self.embedder.dimension,
                   "chunks": [c.to_dict() for c in self._chunks]}
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path) -> "VectorStore":
        payload = json.loads(Path(path).read_text())
        store = cls(HashingEmbedder(payload["dimension"]))
        store._chunks = [DocChunk.from_dict(d) for d in payload["chunks"]]
        return store


@dataclass(frozen=True)
class WebResult:
    title: str
    url: str
    snippet: str

    def to_dict(self) -> dict:
        return {"title": self.title, "url": self.url, "snippet": self.snippet}


class StubWebSearch:
    """Offline web search returning fixture results keyed by query string."""

    def __init__(self, fixtures: Optional[dict] = None):
        self._fixtures = {k.lower().strip(): v for k, v in (fixtures or {}).items()}

    @classmethod
    def from_file(cls, path) -> "StubWebSearch":
        return cls(json.loads(Path(path).read_text()))

    def search(self, query: str) -> list:
        rows = self._fixtures.get(query.lower().strip(), [])
        return [WebResult(r["title"], r["url"], r["snippet"]) for r in rows]


class LiveWebSearch:
    """Adapter for a hosted search endpoint; every result must carry a URL."""

    def __init__(self, endpoint: str, api_key: str = "", timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def search(self, query: str) -> list:
        import httpx

        try:
            resp = httpx.get(
                self.endpoint,
                params={"q": query},
                headers={"X-Subscription-Token": self.api_key} if self.api_key else {},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except httpx.HTTPError as e:
            raise ProviderUnavailable(f"web search unavailable: {e}") from e
        results = []
        for r in resp.json().get("web", {}).get("results", []):
            if r.get("url"):
                results.append(WebResult(r.get("title", ""), r["url"], r.get("description", "")))
        return results
