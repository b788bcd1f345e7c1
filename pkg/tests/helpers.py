"""Shared fixture builders for the test suite."""
from __future__ import annotations

from tracekg.records import ChunkRecord, EntityMention, RelationSpec


def record(
    chunk_id: str = "c-1",
    doc_id: str = "d-1",
    text: str = "sintering emits benzene. GC-MS detected it.",
    entities: dict[str, list[str]] | None = None,
    relations: list[tuple] | None = None,
) -> ChunkRecord:
    """Build a ChunkRecord from terse (category -> names) / relation tuples."""
    if entities is None:
        entities = {"Process": ["sintering"], "VOCSpecies": ["benzene"], "Method": ["GC-MS"]}
    if relations is None:
        relations = [("sintering", "Process", "benzene", "VOCSpecies", "EMITS", "sintering emits benzene", 0.9)]
    return ChunkRecord(
        chunk_id=chunk_id,
        doc_id=doc_id,
        text=text,
        entities={cat: [EntityMention(name=n) for n in names] for cat, names in entities.items()},
        relations=[
            RelationSpec(head=h, head_type=ht, tail=t, tail_type=tt, type=ty, evidence_text=ev, confidence=c)
            for h, ht, t, tt, ty, ev, c in relations
        ],
    )
