"""Embedded in-memory property graph.

Implements the domain ontology (nine entity labels plus Chunk hubs and
Observation attachments), merge semantics keyed on (label, canonical_name),
connectivity metrics, k-hop neighbourhood extraction, and JSONL snapshots.

Thread safety follows a single-writer / multiple-reader contract: all
mutations are serialized through an internal reentrant lock, reads are
lock-free and must not overlap mutation (callers such as the HTTP service
enforce this). Batched mutation is atomic via :meth:`PropertyGraph.transaction`,
which keeps an undo journal and rolls back on any failure.
"""
from __future__ import annotations

import json
import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from .errors import (
    EmptyGraphError,
    NotFoundError,
    ReferentialError,
    SchemaError,
    ValidationError,
)

Scalar = str | int | float | bool | list  # list entries are strings (accumulated evidence)


class NodeLabel(str, Enum):
    """The eleven constructible node labels; anything else is rejected."""

    PROCESS = "Process"
    EMISSION_SOURCE = "EmissionSource"
    VOC_SPECIES = "VOCSpecies"
    CONTROL_TECH = "ControlTech"
    METHOD = "Method"
    MECHANISM = "Mechanism"
    REGULATION = "Regulation"
    FACTOR = "Factor"
    SCENARIO = "Scenario"
    OBSERVATION = "Observation"
    CHUNK = "Chunk"

    @classmethod
    def parse(cls, text: str) -> "NodeLabel":
        try:
            return cls(text)
        except ValueError:
            raise ValidationError(f"unknown node label: {text!r}") from None


class EdgeType(str, Enum):
    """The twelve constructible edge types."""

    EMITS = "EMITS"
    CONTROLLED_BY = "CONTROLLED_BY"
    MEASURED_BY = "MEASURED_BY"
    PARTICIPATES_IN = "PARTICIPATES_IN"
    INFLUENCED_BY = "INFLUENCED_BY"
    BELONGS_TO = "BELONGS_TO"
    CO_OCCURS_IN = "CO_OCCURS_IN"
    REGULATED_BY = "REGULATED_BY"
    OCCURS_UNDER = "OCCURS_UNDER"
    CORRELATES_WITH = "CORRELATES_WITH"
    MEASURES = "MEASURES"
    MENTIONS = "MENTIONS"

    @classmethod
    def parse(cls, text: str) -> "EdgeType":
        try:
            return cls(text.upper())
        except ValueError:
            raise ValidationError(f"unknown edge type: {text!r}") from None


# Entity labels = everything a MENTIONS edge may point at.
ENTITY_LABELS = tuple(l for l in NodeLabel if l is not NodeLabel.CHUNK)


@dataclass
class Node:
    id: int
    label: NodeLabel
    canonical_name: str
    aliases: set[str] = field(default_factory=set)
    attributes: dict[str, Scalar] = field(default_factory=dict)

    def copy(self) -> "Node":
        return Node(
            id=self.id,
            label=self.label,
            canonical_name=self.canonical_name,
            aliases=set(self.aliases),
            attributes={k: (list(v) if isinstance(v, list) else v) for k, v in self.attributes.items()},
        )


@dataclass
class Edge:
    id: int
    src: int
    dst: int
    type: EdgeType
    evidence_texts: list[str] = field(default_factory=list)
    confidence: float = 1.0

    @property
    def evidence_text(self) -> str | None:
        """First recorded evidence string, or None."""
        return self.evidence_texts[0] if self.evidence_texts else None

    def copy(self) -> "Edge":
        return Edge(self.id, self.src, self.dst, self.type, list(self.evidence_texts), self.confidence)


@dataclass
class TopologyReport:
    """Connectivity summary: isolated-node share plus label/type histograms."""

    n_total: int
    n_isolated: int
    p_isolated: float
    label_histogram: dict[str, int]
    relation_histogram: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_total": self.n_total,
            "n_isolated": self.n_isolated,
            "p_isolated": round(self.p_isolated, 4),
            "label_histogram": dict(sorted(self.label_histogram.items())),
            "relation_histogram": dict(sorted(self.relation_histogram.items())),
        }


REQUIRED_CHUNK_ATTRS = ("chunk_id", "doc_id", "text")


def _merge_attribute(existing: dict[str, Scalar], key: str, value: Scalar) -> None:
    if key not in existing:
        existing[key] = list(value) if isinstance(value, list) else value
        return
    current = existing[key]
    if isinstance(current, list) and isinstance(value, list):
        for item in value:
            if item not in current:
                current.append(item)
    elif current != value:
        existing[key] = value  # last write wins for scalar conflicts


class PropertyGraph:
    """Labeled property graph with merge-on-(label, name) identity.

    Node ids are assigned monotonically and are stable for the lifetime of
    the instance (snapshots preserve them). External identity is
    (label, canonical_name).
    """

    def __init__(self) -> None:
        self._nodes: dict[int, Node] = {}
        self._edges: dict[int, Edge] = {}
        self._node_key: dict[tuple[NodeLabel, str], int] = {}
        self._edge_key: dict[tuple[int, int, EdgeType], int] = {}
        self._incident: dict[int, set[int]] = {}  # node id -> incident edge ids (both directions)
        self._next_node_id = 1
        self._next_edge_id = 1
        self._write_lock = threading.RLock()
        self._journal: list[Callable[[], None]] | None = None

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise NotFoundError(f"no node with id {node_id}") from None

    def edge(self, edge_id: int) -> Edge:
        try:
            return self._edges[edge_id]
        except KeyError:
            raise NotFoundError(f"no edge with id {edge_id}") from None

    def nodes(self) -> Iterator[Node]:
        """All nodes in ascending id order."""
        for node_id in sorted(self._nodes):
            yield self._nodes[node_id]

    def edges(self) -> Iterator[Edge]:
        """All edges in ascending id order."""
        for edge_id in sorted(self._edges):
            yield self._edges[edge_id]

    def get_node_id(self, label: NodeLabel, canonical_name: str) -> int | None:
        return self._node_key.get((label, canonical_name))

    def incident_edges(self, node_id: int) -> list[Edge]:
        self.node(node_id)
        return [self._edges[e] for e in sorted(self._incident.get(node_id, ()))]

    def out_edges(self, node_id: int, types: set[EdgeType] | None = None) -> list[Edge]:
        return [
            e for e in self.incident_edges(node_id)
            if e.src == node_id and (types is None or e.type in types)
        ]

    def in_edges(self, node_id: int, types: set[EdgeType] | None = None) -> list[Edge]:
        return [
            e for e in self.incident_edges(node_id)
            if e.dst == node_id and (types is None or e.type in types)
        ]

    def find_node(self, name: str) -> Node | None:
        """Resolve a node by canonical name, then case-insensitive, then alias.

        Deterministic when ambiguous: smallest node id wins.
        """
        hits = [nid for (_, cname), nid in self._node_key.items() if cname == name]
        if not hits:
            folded = name.strip().casefold()
            hits = [nid for (_, cname), nid in self._node_key.items() if cname.casefold() == folded]
        if not hits:
            hits = [
                n.id for n in self._nodes.values()
                if any(a.casefold() == name.strip().casefold() for a in n.aliases)
            ]
        return self._nodes[min(hits)] if hits else None

    def mentioning_chunks(self, node_id: int) -> list[Node]:
        """Chunk nodes with a MENTIONS edge to the given node, by chunk_id order."""
        chunks = [self._nodes[e.src] for e in self.in_edges(node_id, {EdgeType.MENTIONS})]
        return sorted(chunks, key=lambda n: str(n.attributes.get("chunk_id", n.canonical_name)))

    # ------------------------------------------------------------------
    # Mutation
    # ------------------------------------------------------------------

    def _record_undo(self, undo: Callable[[], None]) -> None:
        if self._journal is not None:
            self._journal.append(undo)

    @contextmanager
    def transaction(self) -> Iterator["PropertyGraph"]:
        """Atomic mutation scope: on any exception all changes are rolled back."""
        with self._write_lock:
            if self._journal is not None:
                # Nested scopes join the outer transaction.
                yield self
                return
            self._journal = []
            try:
                yield self
            except BaseException:
                for undo in reversed(self._journal):
                    undo()
                raise
            finally:
                self._journal = None

    def merge_node(
        self,
        label: NodeLabel,
        canonical_name: str,
        aliases: Iterable[str] = (),
        attributes: dict[str, Scalar] | None = None,
    ) -> int:
        """Create the node or union aliases/attributes into the existing one.

        Idempotent: replaying the same call leaves the graph unchanged.
        """
        if not isinstance(label, NodeLabel):
            label = NodeLabel.parse(str(label))
        if not canonical_name or not canonical_name.strip():
            raise ValidationError("canonical_name must be non-empty")
        attributes = attributes or {}
        aliases = {a for a in aliases if a and a != canonical_name}

        with self._write_lock:
            existing_id = self._node_key.get((label, canonical_name))
            if existing_id is None:
                if label is NodeLabel.CHUNK:
                    for attr in REQUIRED_CHUNK_ATTRS:
                        if not attributes.get(attr):
                            raise ValidationError(f"Chunk node requires non-empty {attr!r} attribute")
                node = Node(
                    id=self._next_node_id,
                    label=label,
                    canonical_name=canonical_name,
                    aliases=set(aliases),
                    attributes={k: (list(v) if isinstance(v, list) else v) for k, v in attributes.items()},
                )
                self._next_node_id += 1
                self._nodes[node.id] = node
                self._node_key[(label, canonical_name)] = node.id
                self._incident[node.id] = set()
                self._record_undo(lambda nid=node.id, key=(label, canonical_name): (
                    self._nodes.pop(nid, None),
                    self._node_key.pop(key, None),
                    self._incident.pop(nid, None),
                ))
                return node.id

            node = self._nodes[existing_id]
            before = node.copy()
            self._record_undo(lambda nid=existing_id, prev=before: self._nodes.__setitem__(nid, prev))
            node.aliases.update(aliases)
            node.aliases.discard(node.canonical_name)
            for key, value in attributes.items():
                _merge_attribute(node.attributes, key, value)
            return existing_id

    def merge_edge(
        self,
        src: int,
        dst: int,
        type: EdgeType,
        evidence_text: str | None = None,
        confidence: float = 1.0,
    ) -> int:
        """Create the edge or merge into the existing (src, dst, type) edge.

        Merging keeps the maximum confidence and accumulates distinct
        evidence texts.
        """
        if not isinstance(type, EdgeType):
            type = EdgeType.parse(str(type))
        if src not in self._nodes:
            raise ReferentialError(f"edge source {src} does not exist")
        if dst not in self._nodes:
            raise ReferentialError(f"edge target {dst} does not exist")
        if not 0.0 <= confidence <= 1.0:
            raise ValidationError(f"confidence must be in [0, 1], got {confidence}")
        if type is EdgeType.MENTIONS:
            if self._nodes[src].label is not NodeLabel.CHUNK:
                raise SchemaError("MENTIONS edges must originate at a Chunk node")
            if self._nodes[dst].label is NodeLabel.CHUNK:
                raise SchemaError("MENTIONS edges must terminate at a non-Chunk node")

        with self._write_lock:
            existing_id = self._edge_key.get((src, dst, type))
            if existing_id is None:
                edge = Edge(
                    id=self._next_edge_id,
                    src=src,
                    dst=dst,
                    type=type,
                    evidence_texts=[evidence_text] if evidence_text else [],
                    confidence=confidence,
                )
                self._next_edge_id += 1
                self._edges[edge.id] = edge
                self._edge_key[(src, dst, type)] = edge.id
                self._incident[src].add(edge.id)
                self._incident[dst].add(edge.id)
                self._record_undo(lambda eid=edge.id, key=(src, dst, type): (
                    self._edges.pop(eid, None),
                    self._edge_key.pop(key, None),
                    self._incident[src].discard(eid),
                    self._incident[dst].discard(eid),
                ))
                return edge.id

            edge = self._edges[existing_id]
            before = edge.copy()
            self._record_undo(lambda eid=existing_id, prev=before: self._edges.__setitem__(eid, prev))
            edge.confidence = max(edge.confidence, confidence)
            if evidence_text and evidence_text not in edge.evidence_texts:
                edge.evidence_texts.append(evidence_text)
            return existing_id

    def remove_edge(self, edge_id: int) -> None:
        with self._write_lock:
            edge = self.edge(edge_id)
            self._record_undo(lambda e=edge.copy(): self._restore_edge(e))
            del self._edges[edge_id]
            del self._edge_key[(edge.src, edge.dst, edge.type)]
            self._incident[edge.src].discard(edge_id)
            self._incident[edge.dst].discard(edge_id)

    def remove_node(self, node_id: int) -> None:
        """Delete a node and every incident edge."""
        with self._write_lock:
            node = self.node(node_id)
            for edge_id in sorted(self._incident.get(node_id, set())):
                self.remove_edge(edge_id)
            self._record_undo(lambda n=node.copy(): self._restore_node(n))
            del self._nodes[node_id]
            del self._node_key[(node.label, node.canonical_name)]
            del self._incident[node_id]

    def rename_node(self, node_id: int, new_name: str) -> None:
        """Change a node's canonical name; the old name becomes an alias.

        The target (label, new_name) must be free; merging identities is
        :meth:`merge_into`'s job.
        """
        if not new_name or not new_name.strip():
            raise ValidationError("canonical_name must be non-empty")
        with self._write_lock:
            node = self.node(node_id)
            if node.canonical_name == new_name:
                return
            if (node.label, new_name) in self._node_key:
                raise ValidationError(
                    f"({node.label.value}, {new_name!r}) already exists; merge instead of rename"
                )
            before = node.copy()
            old_key = (node.label, node.canonical_name)
            self._record_undo(lambda nid=node_id, prev=before, key=old_key: (
                self._nodes.__setitem__(nid, prev),
                self._node_key.pop((prev.label, new_name), None),
                self._node_key.__setitem__(key, nid),
            ))
            del self._node_key[old_key]
            self._node_key[(node.label, new_name)] = node_id
            node.aliases.add(node.canonical_name)
            node.aliases.discard(new_name)
            node.canonical_name = new_name

    def merge_into(self, victim_id: int, survivor_id: int) -> None:
        """Redirect all of victim's edges onto survivor, union its payload, drop it.

        Redirected edges collapse per the duplicate-edge merge rule; the typed
        edge multiset is conserved up to endpoint redirection.
        """
        if victim_id == survivor_id:
            return
        with self._write_lock:
            victim = self.node(victim_id)
            survivor = self.node(survivor_id)
            for edge in list(self.incident_edges(victim_id)):
                new_src = survivor_id if edge.src == victim_id else edge.src
                new_dst = survivor_id if edge.dst == victim_id else edge.dst
                self.remove_edge(edge.id)
                if new_src == new_dst:
                    continue  # merging endpoints would create a self-loop; drop
                merged_id = self.merge_edge(new_src, new_dst, edge.type, None, edge.confidence)
                merged = self._edges[merged_id]
                before = merged.copy()
                self._record_undo(lambda eid=merged_id, prev=before: self._edges.__setitem__(eid, prev))
                for text in edge.evidence_texts:
                    if text not in merged.evidence_texts:
                        merged.evidence_texts.append(text)
            self.merge_node(
                survivor.label,
                survivor.canonical_name,
                aliases=victim.aliases | {victim.canonical_name},
                attributes=victim.attributes,
            )
            self.remove_node(victim_id)

    def _restore_edge(self, edge: Edge) -> None:
        self._edges[edge.id] = edge
        self._edge_key[(edge.src, edge.dst, edge.type)] = edge.id
        self._incident[edge.src].add(edge.id)
        self._incident[edge.dst].add(edge.id)

    def _restore_node(self, node: Node) -> None:
        self._nodes[node.id] = node
        self._node_key[(node.label, node.canonical_name)] = node.id
        self._incident.setdefault(node.id, set())

    # ------------------------------------------------------------------
    # Metrics and traversal
    # ------------------------------------------------------------------

    def degree(self, node_id: int) -> int:
        """Number of incident edges, any type, either direction."""
        return len(self._incident.get(node_id, ()))

    def topology_report(self) -> TopologyReport:
        """Isolated-node percentage plus label and relation histograms."""
        if not self._nodes:
            raise EmptyGraphError("topology metrics are undefined on an empty graph")
        n_total = len(self._nodes)
        n_isolated = sum(1 for nid in self._nodes if not self._incident[nid])
        labels: dict[str, int] = {}
        for node in self._nodes.values():
            labels[node.label.value] = labels.get(node.label.value, 0) + 1
        relations: dict[str, int] = {}
        for edge in self._edges.values():
            relations[edge.type.value] = relations.get(edge.type.value, 0) + 1
        return TopologyReport(
            n_total=n_total,
            n_isolated=n_isolated,
            p_isolated=100.0 * n_isolated / n_total,
            label_histogram=labels,
            relation_histogram=relations,
        )

    def khop_subgraph(
        self,
        seeds: Iterable[int],
        hops: int,
        edge_filter: set[EdgeType] | None = None,
    ) -> "PropertyGraph":
        """Induced subgraph within `hops` undirected steps of any seed.

        Node ids are preserved; nodes and edges are materialized in ascending
        id order, so the result is deterministic.
        """
        seeds = list(seeds)
        if hops < 1:
            raise ValidationError(f"hops must be >= 1, got {hops}")
        for seed in seeds:
            if seed not in self._nodes:
                raise NotFoundError(f"seed node {seed} does not exist")

        reached: dict[int, int] = {s: 0 for s in seeds}
        frontier = deque(seeds)
        while frontier:
            current = frontier.popleft()
            depth = reached[current]
            if depth >= hops:
                continue
            for edge_id in self._incident.get(current, ()):
                edge = self._edges[edge_id]
                if edge_filter is not None and edge.type not in edge_filter:
                    continue
                neighbour = edge.dst if edge.src == current else edge.src
                if neighbour not in reached:
                    reached[neighbour] = depth + 1
                    frontier.append(neighbour)

        sub = PropertyGraph()
        for node_id in sorted(reached):
            sub._restore_node(self._nodes[node_id].copy())
        for edge_id in sorted(self._edges):
            edge = self._edges[edge_id]
            if edge.src in reached and edge.dst in reached:
                if edge_filter is None or edge.type in edge_filter:
                    sub._restore_edge(edge.copy())
        sub._next_node_id = max(reached, default=0) + 1
        sub._next_edge_id = max((e.id for e in sub._edges.values()), default=0) + 1
        return sub

    # ------------------------------------------------------------------
    # Snapshot I/O (JSONL, one object per line)
    # ------------------------------------------------------------------

    def to_jsonl_lines(self) -> Iterator[str]:
        for node in self.nodes():
            yield json.dumps(
                {
                    "kind": "node",
                    "id": node.id,
                    "label": node.label.value,
                    "canonical_name": node.canonical_name,
                    "aliases": sorted(node.aliases),
                    "attributes": node.attributes,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        for edge in self.edges():
            yield json.dumps(
                {
                    "kind": "edge",
                    "id": edge.id,
                    "src": edge.src,
                    "dst": edge.dst,
                    "type": edge.type.value,
                    "evidence_text": edge.evidence_text,
                    "evidence_texts": edge.evidence_texts,
                    "confidence": edge.confidence,
                },
                ensure_ascii=False,
                sort_keys=True,
            )

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for line in self.to_jsonl_lines():
                handle.write(line + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "PropertyGraph":
        graph = cls()
        nodes: list[dict[str, Any]] = []
        edges: list[dict[str, Any]] = []
        with open(path, "r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                kind = obj.get("kind")
                if kind == "node":
                    nodes.append(obj)
                elif kind == "edge":
                    edges.append(obj)
                else:
                    raise ValidationError(f"snapshot line {line_no}: unknown kind {kind!r}")
        for obj in nodes:
            node = Node(
                id=int(obj["id"]),
                label=NodeLabel.parse(obj["label"]),
                canonical_name=obj["canonical_name"],
                aliases=set(obj.get("aliases", [])),
                attributes=obj.get("attributes", {}),
            )
            if node.id in graph._nodes:
                raise ValidationError(f"duplicate node id {node.id} in snapshot")
            graph._restore_node(node)
        for obj in edges:
            texts = obj.get("evidence_texts")
            if texts is None:
                texts = [obj["evidence_text"]] if obj.get("evidence_text") else []
            edge = Edge(
                id=int(obj["id"]),
                src=int(obj["src"]),
                dst=int(obj["dst"]),
                type=EdgeType.parse(obj["type"]),
                evidence_texts=list(texts),
                confidence=float(obj.get("confidence", 1.0)),
            )
            if edge.src not in graph._nodes or edge.dst not in graph._nodes:
                raise ReferentialError(f"snapshot edge {edge.id} references a missing node")
            if edge.id in graph._edges:
                raise ValidationError(f"duplicate edge id {edge.id} in snapshot")
            graph._restore_edge(edge)
        graph._next_node_id = max(graph._nodes, default=0) + 1
        graph._next_edge_id = max(graph._edges, default=0) + 1
        return graph


def structurally_equal(a: PropertyGraph, b: PropertyGraph) -> bool:
    """Isomorphism under external identity: ids are ignored, payloads are not.

    Evidence lists compare as sets so that ingest order does not matter.
    """

    def node_signature(g: PropertyGraph) -> dict[tuple[str, str], tuple]:
        out = {}
        for node in g.nodes():
            attrs = tuple(
                sorted(
                    (k, tuple(sorted(v)) if isinstance(v, list) else v)
                    for k, v in node.attributes.items()
                )
            )
            out[(node.label.value, node.canonical_name)] = (tuple(sorted(node.aliases)), attrs)
        return out

    def edge_signature(g: PropertyGraph) -> set[tuple]:
        out = set()
        for edge in g.edges():
            src = g.node(edge.src)
            dst = g.node(edge.dst)
            out.add(
                (
                    (src.label.value, src.canonical_name),
                    (dst.label.value, dst.canonical_name),
                    edge.type.value,
                    round(edge.confidence, 9),
                    tuple(sorted(edge.evidence_texts)),
                )
            )
        return out

    return node_signature(a) == node_signature(b) and edge_signature(a) == edge_signature(b)
