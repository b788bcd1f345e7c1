"""Sliding-window document segmentation with stable chunk identities."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import ValidationError

DEFAULT_WINDOW = 2000  # hard cap of the default profile
DEFAULT_OVERLAP = 200


@dataclass(frozen=True)
class ChunkingConfig:
    window_size: int = DEFAULT_WINDOW
    overlap: int = DEFAULT_OVERLAP

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValidationError("window_size must be >= 1")
        if not 0 <= self.overlap < self.window_size:
            raise ValidationError(
                f"overlap must satisfy 0 <= overlap < window_size, got {self.overlap}/{self.window_size}"
            )

    @property
    def stride(self) -> int:
        return self.window_size - self.overlap


def chunk_document(doc_id: str, text: str, config: ChunkingConfig | None = None) -> list[tuple[int, str]]:
    """Split text into overlapping windows.

    Chunk k covers [k*stride, k*stride + window); stripping the first
    ``overlap`` characters of every chunk after the first reconstructs the
    original text exactly.
    """
    if not text:
        raise ValidationError(f"document {doc_id!r} has empty text")
    config = config or ChunkingConfig()
    chunks: list[tuple[int, str]] = []
    start = 0
    index = 0
    while True:
        chunks.append((index, text[start : start + config.window_size]))
        if start + config.window_size >= len(text):
            break
        start += config.stride
        index += 1
    return chunks


def chunk_identifier(doc_id: str, index: int) -> str:
    """Stable hex id for (document, chunk index); identical across processes."""
    if index < 0:
        raise ValidationError("chunk index must be >= 0")
    digest = hashlib.sha256(f"{doc_id}\x1f{index}".encode("utf-8"))
    return digest.hexdigest()
