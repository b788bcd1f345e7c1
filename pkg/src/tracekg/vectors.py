"""Exact flat vector index over chunk texts.

The embedder is a deterministic token-hash bag-of-words: each token hashes
to one of d buckets with a hash-derived sign, and the count vector is
L2-normalized. It is content-addressed and process-stable, which makes
retrieval rankings reproducible without any model weights. Search is exact
cosine over every entry; ties break by chunk_id.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import NodeLabel, PropertyGraph

EMBEDDER_ID = "hash-bow-64"
DEFAULT_DIMENSION = 64

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[./-][a-z0-9]+)*")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def embed_text(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Unit-norm bag-of-hashed-tokens embedding; deterministic across runs."""
    vector = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % dimension
        sign = 1.0 if digest[4] & 1 else -1.0
        vector[bucket] += sign
    norm = float(np.linalg.norm(vector))
    if norm > 0.0:
        vector /= norm
    return vector


@dataclass
class IndexEntry:
    chunk_id: str
    text: str
    vector: np.ndarray


class VectorIndex:
    """Exact cosine top-k over unit-norm vectors of one fixed dimension."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION, embedder_id: str = EMBEDDER_ID):
        self.dimension = dimension
        self.embedder_id = embedder_id
        self.entries: list[IndexEntry] = []
        self.search_count = 0  # instrumentation for cascade tests
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, chunk_id: str, text: str, vector: np.ndarray | None = None) -> None:
        if vector is None:
            vector = embed_text(text, self.dimension)
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dimension,):
            raise ValidationError(
                f"vector dimension {vector.shape} does not match index dimension {self.dimension}"
            )
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise ValidationError(f"entry {chunk_id!r} embeds to the zero vector")
        if abs(norm - 1.0) > 1e-9:
            vector = vector / norm
        self.entries.append(IndexEntry(chunk_id=chunk_id, text=text, vector=vector))
        self._matrix = None

    def _stacked(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack([e.vector for e in self.entries])
        return self._matrix

    def search(self, query: str | np.ndarray, k: int) -> list[tuple[IndexEntry, float]]:
        """Exact top-k by cosine; k beyond the index size returns everything."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        self.search_count += 1
        if not self.entries:
            return []
        if isinstance(query, str):
            query = embed_text(query, self.dimension)
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise ValidationError("query vector has the wrong dimension")
        scores = self._stacked() @ query
        ranked = sorted(
            zip(self.entries, scores.tolist()),
            key=lambda pair: (-pair[1], pair[0].chunk_id),
        )
        return [(entry, float(score)) for entry, score in ranked[:k]]

    # -- persistence: header line then one entry per line ---------------

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(
                json.dumps(
                    {"kind": "header", "dimension": self.dimension, "embedder": self.embedder_id}
                )
                + "\n"
            )
            for entry in self.entries:
                handle.write(
                    json.dumps(
                        {
                            "chunk_id": entry.chunk_id,
                            "text": entry.text,
                            "vector": [round(v, 12) for v in entry.vector.tolist()],
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "VectorIndex":
        with open(path, "r", encoding="utf-8") as handle:
            header_line = handle.readline().strip()
            if not header_line:
                raise ValidationError("vector index file is empty")
            header = json.loads(header_line)
            if header.get("kind") != "header":
                raise ValidationError("vector index file must start with a header line")
            index = cls(dimension=int(header["dimension"]), embedder_id=str(header["embedder"]))
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                index.add(obj["chunk_id"], obj.get("text", ""), np.array(obj["vector"], dtype=np.float64))
        return index

    @classmethod
    def from_graph(cls, graph: PropertyGraph, dimension: int = DEFAULT_DIMENSION) -> "VectorIndex":
        """Index every chunk node's text, ordered by chunk_id."""
        index = cls(dimension=dimension)
        chunks = [n for n in graph.nodes() if n.label is NodeLabel.CHUNK]
        chunks.sort(key=lambda n: str(n.attributes.get("chunk_id", n.canonical_name)))
        for chunk in chunks:
            text = str(chunk.attributes.get("text", ""))
            if tokenize(text):
                index.add(str(chunk.attributes.get("chunk_id", chunk.canonical_name)), text)
        return index
