"""Chunk extraction records and resilient JSONL stream parsing.

A :class:`ChunkRecord` is the canonical dataset unit of this repo: one
document chunk with its raw text, the entities found in it (grouped by
category), and the typed relations between those entities. The JSONL schema
mirrors the dataclass fields exactly.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Any, IO, Iterable, Iterator

from .errors import RepairError, StreamError, ValidationError
from .graph import EdgeType, NodeLabel
from .jsonrepair import repair_json

# Categories permitted in entity maps: every label except the Chunk hub.
ENTITY_CATEGORIES = frozenset(l.value for l in NodeLabel if l is not NodeLabel.CHUNK)


@dataclass
class EntityMention:
    name: str
    evidence_span: tuple[int, int] | None = None
    evidence_text: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name}
        if self.evidence_span is not None:
            out["evidence_span"] = list(self.evidence_span)
        if self.evidence_text is not None:
            out["evidence_text"] = self.evidence_text
        return out


@dataclass
class RelationSpec:
    head: str
    head_type: str
    tail: str
    tail_type: str
    type: str
    evidence_text: str | None = None
    confidence: float = 1.0

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "head": self.head,
            "head_type": self.head_type,
            "tail": self.tail,
            "tail_type": self.tail_type,
            "type": self.type,
            "confidence": self.confidence,
        }
        if self.evidence_text is not None:
            out["evidence_text"] = self.evidence_text
        return out


@dataclass
class ChunkRecord:
    chunk_id: str
    doc_id: str
    text: str
    entities: dict[str, list[EntityMention]] = field(default_factory=dict)
    relations: list[RelationSpec] = field(default_factory=list)
    repaired: bool = False  # set by the stream parser, not part of the schema

    def entity_names(self) -> set[tuple[str, str]]:
        """All (category, name) pairs present in the entity lists."""
        return {(cat, m.name) for cat, mentions in self.entities.items() for m in mentions}

    def validate(self) -> None:
        if not self.chunk_id:
            raise ValidationError("chunk_id must be non-empty")
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        if not self.text:
            raise ValidationError("text must be non-empty")
        for category, mentions in self.entities.items():
            if category not in ENTITY_CATEGORIES:
                raise ValidationError(f"unknown entity category: {category!r}")
            for mention in mentions:
                if not mention.name:
                    raise ValidationError(f"empty entity name in category {category!r}")
                if mention.evidence_span is not None:
                    start, end = mention.evidence_span
                    if not (0 <= start <= end <= len(self.text)):
                        raise ValidationError(
                            f"evidence_span {mention.evidence_span} outside text bounds "
                            f"for entity {mention.name!r}"
                        )
        names = self.entity_names()
        for rel in self.relations:
            edge_type = EdgeType.parse(rel.type)
            if edge_type is EdgeType.MENTIONS:
                raise ValidationError("MENTIONS relations are created during grounding, not in records")
            for role, name, category in (("head", rel.head, rel.head_type), ("tail", rel.tail, rel.tail_type)):
                if category not in ENTITY_CATEGORIES:
                    raise ValidationError(f"unknown {role}_type: {category!r}")
                if (category, name) not in names:
                    raise ValidationError(
                        f"relation {role} {name!r} ({category}) not present in entity lists"
                    )
            if not 0.0 <= rel.confidence <= 1.0:
                raise ValidationError(f"relation confidence {rel.confidence} outside [0, 1]")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ChunkRecord":
        if not isinstance(obj, dict):
            raise ValidationError("record must be a JSON object")
        entities: dict[str, list[EntityMention]] = {}
        for category, raw_mentions in (obj.get("entities") or {}).items():
            mentions = []
            for raw in raw_mentions:
                if isinstance(raw, str):  # tolerate bare-name shorthand
                    raw = {"name": raw}
                span = raw.get("evidence_span")
                mentions.append(
                    EntityMention(
                        name=str(raw.get("name", "")),
                        evidence_span=(int(span[0]), int(span[1])) if span else None,
                        evidence_text=raw.get("evidence_text"),
                    )
                )
            entities[category] = mentions
        relations = []
        for raw in obj.get("relations") or []:
            relations.append(
                RelationSpec(
                    head=str(raw.get("head", "")),
                    head_type=str(raw.get("head_type", "")),
                    tail=str(raw.get("tail", "")),
                    tail_type=str(raw.get("tail_type", "")),
                    type=str(raw.get("type", "")),
                    evidence_text=raw.get("evidence_text"),
                    confidence=float(raw.get("confidence", 1.0)),
                )
            )
        record = cls(
            chunk_id=str(obj.get("chunk_id", "")),
            doc_id=str(obj.get("doc_id", "")),
            text=str(obj.get("text", "")),
            entities=entities,
            relations=relations,
        )
        record.validate()
        return record

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "entities": {cat: [m.to_dict() for m in mentions] for cat, mentions in self.entities.items()},
            "relations": [r.to_dict() for r in self.relations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


@dataclass
class ParseFailure:
    line_no: int
    code: str  # "json" | "schema" | "duplicate_chunk_id"
    error: str
    raw: str


StreamResult = "ChunkRecord | ParseFailure"


def _iter_lines(stream: IO[bytes] | IO[str] | Iterable[str] | str) -> Iterator[str]:
    if isinstance(stream, (bytes, str)):
        stream = io.StringIO(stream.decode("utf-8") if isinstance(stream, bytes) else stream)
    for line in stream:
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        yield line


def parse_jsonl_stream(
    stream: IO[bytes] | IO[str] | Iterable[str] | str,
) -> Iterator[tuple[int, "ChunkRecord | ParseFailure"]]:
    """Stream (line_no, record-or-failure) pairs; never aborts on bad content.

    Malformed lines are first run through :func:`repair_json`; lines repaired
    this way yield records with ``repaired=True``. Duplicate chunk_ids within
    one stream are failures. Only I/O errors terminate the iteration, as a
    :class:`StreamError`.
    """
    seen_ids: set[str] = set()
    lines = _iter_lines(stream)
    line_no = 0
    while True:
        try:
            line = next(lines)
        except StopIteration:
            return
        except (OSError, UnicodeError) as exc:
            raise StreamError(f"stream failed at line {line_no + 1}: {exc}") from exc
        line_no += 1
        stripped = line.strip()
        if not stripped:
            continue
        repaired = False
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError:
            try:
                obj = json.loads(repair_json(stripped))
                repaired = True
            except RepairError as exc:
                yield line_no, ParseFailure(line_no, "json", str(exc), stripped)
                continue
        try:
            record = ChunkRecord.from_dict(obj)
        except ValidationError as exc:
            yield line_no, ParseFailure(line_no, "schema", str(exc), stripped)
            continue
        if record.chunk_id in seen_ids:
            yield line_no, ParseFailure(
                line_no, "duplicate_chunk_id", f"chunk_id {record.chunk_id!r} repeated", stripped
            )
            continue
        seen_ids.add(record.chunk_id)
        record.repaired = repaired
        yield line_no, record


def read_records(path: str) -> list[ChunkRecord]:
    """Load all valid records from a JSONL file, ignoring failed lines."""
    with open(path, "r", encoding="utf-8") as handle:
        return [item for _, item in parse_jsonl_stream(handle) if isinstance(item, ChunkRecord)]
