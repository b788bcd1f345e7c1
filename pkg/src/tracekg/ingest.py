"""Batched, transactional loading of chunk records into the property graph.

Each batch applies atomically: chunk hub nodes, entity nodes (normalized),
chunk->entity MENTIONS grounding, and typed relations with evidence and
confidence. Invalid records are rejected and counted without failing the
batch; an infrastructure failure mid-batch rolls the whole batch back.

Numeric observation entities ("11.14 g/t") that no relation references are
folded into the chunk node's ``observations`` attribute instead of becoming
nodes, which is what the later restructuring stage would do anyway.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ValidationError
from .graph import EdgeType, NodeLabel, PropertyGraph
from .normalize import NormalizationDictionary, normalize_name
from .records import ChunkRecord

# Number with optional comparator, tolerance, and unit: "11.14 g/t", "~450 °C", "25%".
_MEASUREMENT_RE = re.compile(
    r"^\s*[~<>≤≥≈]?\s*-?\d+(?:[.,]\d+)?(?:\s*[±–-]\s*\d+(?:[.,]\d+)?)?"
    r"\s*(?:[%‰]|°\s?[A-Za-z]?|[a-zA-Zμµ][a-zA-Z0-9μµ%/·^°.\-]*)?\s*$"
)


def is_measurement_token(name: str) -> bool:
    """True when the name is a bare numeric value with an optional unit."""
    return bool(name) and bool(_MEASUREMENT_RE.match(name))


@dataclass
class BatchConfig:
    batch_size: int = 100

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class IngestStats:
    records_ingested: int = 0
    records_rejected: int = 0
    nodes_created: int = 0
    nodes_merged: int = 0
    edges_created: int = 0
    edges_merged: int = 0
    mentions_created: int = 0
    observation_attributes: int = 0
    rejections: list[dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "records_ingested": self.records_ingested,
            "records_rejected": self.records_rejected,
            "nodes_created": self.nodes_created,
            "nodes_merged": self.nodes_merged,
            "edges_created": self.edges_created,
            "edges_merged": self.edges_merged,
            "mentions_created": self.mentions_created,
            "observation_attributes": self.observation_attributes,
            "rejections": self.rejections,
        }


def _batches(records: Sequence[ChunkRecord], size: int) -> Iterable[Sequence[ChunkRecord]]:
    for start in range(0, len(records), size):
        yield records[start : start + size]


def _merge_node_counted(graph: PropertyGraph, stats: IngestStats, *args, **kwargs) -> int:
    before = graph.node_count
    node_id = graph.merge_node(*args, **kwargs)
    if graph.node_count > before:
        stats.nodes_created += 1
    else:
        stats.nodes_merged += 1
    return node_id


def _merge_edge_counted(graph: PropertyGraph, stats: IngestStats, *args, **kwargs) -> int:
    before = graph.edge_count
    edge_id = graph.merge_edge(*args, **kwargs)
    created = graph.edge_count > before
    if created:
        stats.edges_created += 1
    else:
        stats.edges_merged += 1
    if args[2] is EdgeType.MENTIONS and created:
        stats.mentions_created += 1
    return edge_id


def _apply_record(
    record: ChunkRecord,
    graph: PropertyGraph,
    dictionary: NormalizationDictionary | None,
    stats: IngestStats,
    ground_chunks: bool,
) -> None:
    referenced = {(r.head_type, r.head) for r in record.relations}
    referenced |= {(r.tail_type, r.tail) for r in record.relations}

    chunk_observations: list[str] = []
    node_ids: dict[tuple[str, str], int] = {}  # (category, raw name) -> node id
    entity_plan: list[tuple[str, str, str, str | None]] = []  # category, raw, normalized, evidence

    for category, mentions in record.entities.items():
        for mention in mentions:
            normalized = normalize_name(mention.name, dictionary)
            migrate = (
                ground_chunks
                and category == NodeLabel.OBSERVATION.value
                and is_measurement_token(mention.name)
                and (category, mention.name) not in referenced
            )
            if migrate:
                if mention.name not in chunk_observations:
                    chunk_observations.append(mention.name)
                continue
            entity_plan.append((category, mention.name, normalized, mention.evidence_text))

    chunk_node: int | None = None
    if ground_chunks:
        attributes: dict = {"chunk_id": record.chunk_id, "doc_id": record.doc_id, "text": record.text}
        if chunk_observations:
            attributes["observations"] = chunk_observations
            stats.observation_attributes += len(chunk_observations)
        chunk_node = _merge_node_counted(graph, stats, NodeLabel.CHUNK, record.chunk_id, attributes=attributes)

    for category, raw, normalized, evidence in entity_plan:
        label = NodeLabel.parse(category)
        aliases = {raw} if raw != normalized else set()
        node_id = _merge_node_counted(graph, stats, label, normalized, aliases=aliases)
        node_ids[(category, raw)] = node_ids[(category, normalized)] = node_id
        if chunk_node is not None:
            _merge_edge_counted(graph, stats, chunk_node, node_id, EdgeType.MENTIONS, evidence, 1.0)

    for rel in record.relations:
        head = node_ids.get((rel.head_type, rel.head))
        tail = node_ids.get((rel.tail_type, rel.tail))
        if head is None:  # local-first, then graph-wide by normalized name
            head = graph.get_node_id(NodeLabel.parse(rel.head_type), normalize_name(rel.head, dictionary))
        if tail is None:
            tail = graph.get_node_id(NodeLabel.parse(rel.tail_type), normalize_name(rel.tail, dictionary))
        if head is None or tail is None or head == tail:
            continue
        _merge_edge_counted(
            graph, stats, head, tail, EdgeType.parse(rel.type), rel.evidence_text, rel.confidence
        )


def ingest_records(
    records: Sequence[ChunkRecord],
    graph: PropertyGraph,
    dictionary: NormalizationDictionary | None = None,
    config: BatchConfig | None = None,
    *,
    ground_chunks: bool = True,
    failure_hook: Callable[[ChunkRecord], None] | None = None,
) -> IngestStats:
    """Load records batch by batch; each batch is atomic.

    ``ground_chunks=False`` loads only entities and typed relations (no Chunk
    hubs, no MENTIONS); the topology pipeline uses this to measure raw
    connectivity. ``failure_hook`` is a test seam invoked per record inside
    the transaction.
    """
    config = config or BatchConfig()
    stats = IngestStats()
    for batch in _batches(records, config.batch_size):
        with graph.transaction():
            for record in batch:
                if failure_hook is not None:
                    failure_hook(record)
                try:
                    record.validate()
                except ValidationError as exc:
                    stats.records_rejected += 1
                    stats.rejections.append({"chunk_id": record.chunk_id, "reason": str(exc)})
                    continue
                _apply_record(record, graph, dictionary, stats, ground_chunks)
                stats.records_ingested += 1
    return stats
