"""Pattern-match executor with evidence backtracking.

Matching semantics (documented contract, mirrored by the test oracle):

* Homomorphism: two variables may bind the same node.
* A match assigns every node variable a node id and every edge pattern a
  path (tuple of edge ids). Single-hop patterns bind length-1 paths.
* Variable-length patterns expand breadth-wise between ``min_hops`` and
  ``max_hops`` edges, never reusing an edge within one path; nodes may
  repeat. Each distinct edge path is a distinct match.
* Filters on an edge variable must hold for every edge of its path.
* Rows are ordered lexicographically by the bound ids in first-appearance
  variable order; LIMIT applies after ordering.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

from ..graph import Edge, Node, NodeLabel, PropertyGraph
from .ast import EdgePattern, Filter, NodePattern, Query

DEFAULT_EVIDENCE_CAP = 3

Binding = int | tuple[int, ...]  # node id, or edge-id path


@dataclass
class ResultRow:
    bindings: dict[str, Binding]
    evidence: list[tuple[str, str]] | None = None  # (chunk_id, chunk text)


def _node_matches(node: Node, pattern: NodePattern) -> bool:
    if pattern.label is not None and node.label is not pattern.label:
        return False
    if pattern.name is not None and node.canonical_name != pattern.name:
        return False
    return True


def _edge_paths(graph: PropertyGraph, start: int, pattern: EdgePattern) -> Iterator[tuple[tuple[int, ...], int]]:
    """All (edge-id path, endpoint) pairs reachable per the pattern."""

    def walk(current: int, used: frozenset[int], path: tuple[int, ...]):
        if pattern.min_hops <= len(path) <= pattern.max_hops:
            yield path, current
        if len(path) >= pattern.max_hops:
            return
        if pattern.direction == "out":
            hops = graph.out_edges(current, pattern.types and set(pattern.types))
        else:
            hops = graph.in_edges(current, pattern.types and set(pattern.types))
        for edge in hops:
            if edge.id in used:
                continue
            nxt = edge.dst if pattern.direction == "out" else edge.src
            yield from walk(nxt, used | {edge.id}, path + (edge.id,))

    yield from walk(start, frozenset(), ())


def _node_attr(node: Node, attribute: str) -> Any:
    if attribute in ("name", "canonical_name"):
        return node.canonical_name
    if attribute == "label":
        return node.label.value
    if attribute == "id":
        return node.id
    return node.attributes.get(attribute)


def _edge_attr(edge: Edge, attribute: str) -> Any:
    if attribute == "confidence":
        return edge.confidence
    if attribute == "type":
        return edge.type.value
    if attribute == "evidence_text":
        return edge.evidence_text
    return None


def _compare(actual: Any, op: str, expected: Any) -> bool:
    if actual is None:
        return False
    if op == "=":
        return actual == expected
    if op == "!=":
        return actual != expected
    numeric = (int, float)
    if isinstance(actual, bool) or isinstance(expected, bool):
        return False  # ordering over booleans is undefined
    if isinstance(actual, numeric) and isinstance(expected, numeric):
        pass
    elif isinstance(actual, str) and isinstance(expected, str):
        pass
    else:
        return False
    if op == ">=":
        return actual >= expected
    if op == "<=":
        return actual <= expected
    if op == ">":
        return actual > expected
    if op == "<":
        return actual < expected
    return False


def passes_filter(graph: PropertyGraph, flt: Filter, binding: Binding) -> bool:
    if isinstance(binding, tuple):
        return all(
            _compare(_edge_attr(graph.edge(edge_id), flt.attribute), flt.op, flt.value)
            for edge_id in binding
        )
    return _compare(_node_attr(graph.node(binding), flt.attribute), flt.op, flt.value)


def sort_key(query: Query, bindings: dict[str, Binding]) -> tuple:
    key = []
    for var in query.variables():
        value = bindings[var]
        key.append(value if isinstance(value, tuple) else (value,))
    return tuple(key)


def execute(query: Query, graph: PropertyGraph) -> list[ResultRow]:
    """All matches, filtered, deterministically ordered, limited."""
    matches: list[dict[str, Binding]] = []

    def match_remaining(path_index: int, bindings: dict[str, Binding]) -> None:
        if path_index == len(query.paths):
            matches.append(dict(bindings))
            return
        path = query.paths[path_index]
        first = path.nodes[0]

        def bind_node(pattern: NodePattern, node_id: int, scope: dict[str, Binding]) -> dict[str, Binding] | None:
            if not _node_matches(graph.node(node_id), pattern):
                return None
            bound = scope.get(pattern.var)
            if bound is not None:
                return scope if bound == node_id else None
            out = dict(scope)
            out[pattern.var] = node_id
            return out

        def walk_elements(position: int, current_node: int, scope: dict[str, Binding]) -> None:
            if position == len(path.edges):
                match_remaining(path_index + 1, scope)
                return
            edge_pattern = path.edges[position]
            next_pattern = path.nodes[position + 1]
            for edge_path, endpoint in _edge_paths(graph, current_node, edge_pattern):
                bound = scope.get(edge_pattern.var)
                if bound is not None and bound != edge_path:
                    continue
                scoped = dict(scope)
                scoped[edge_pattern.var] = edge_path
                after_node = bind_node(next_pattern, endpoint, scoped)
                if after_node is not None:
                    walk_elements(position + 1, endpoint, after_node)

        anchored = bindings.get(first.var)
        if anchored is not None and isinstance(anchored, int):
            candidates: list[int] = [anchored]
        else:
            candidates = [n.id for n in graph.nodes()]
        for node_id in candidates:
            scope = bind_node(first, node_id, bindings)
            if scope is not None:
                walk_elements(0, node_id, scope)

    match_remaining(0, {})

    filtered = [
        b for b in matches
        if all(passes_filter(graph, flt, b[flt.var]) for flt in query.filters)
    ]
    filtered.sort(key=lambda b: sort_key(query, b))
    if query.limit is not None:
        filtered = filtered[: query.limit]
    rows = [ResultRow(bindings=b) for b in filtered]
    if query.with_evidence:
        backtrack_evidence(rows, graph, DEFAULT_EVIDENCE_CAP)
    return rows


def backtrack_evidence(
    rows: list[ResultRow], graph: PropertyGraph, per_node_cap: int = DEFAULT_EVIDENCE_CAP
) -> list[ResultRow]:
    """Attach up to per_node_cap mentioning-chunk texts per bound entity node.

    Items are deduplicated within a row and ordered by chunk_id.
    """
    if per_node_cap < 1:
        raise ValueError("per_node_cap must be >= 1")
    for row in rows:
        collected: dict[str, str] = {}
        for value in row.bindings.values():
            if isinstance(value, tuple):
                continue
            node = graph.node(value)
            if node.label is NodeLabel.CHUNK:
                continue
            for chunk in graph.mentioning_chunks(value)[:per_node_cap]:
                chunk_id = str(chunk.attributes.get("chunk_id", chunk.canonical_name))
                collected.setdefault(chunk_id, str(chunk.attributes.get("text", "")))
        row.evidence = sorted(collected.items())
    return rows


def row_to_dict(graph: PropertyGraph, row: ResultRow, returns: list[str] | None = None) -> dict:
    """JSON-ready projection of a row (all bindings when returns is None)."""
    variables = returns if returns is not None else sorted(row.bindings)
    bindings = {}
    for var in variables:
        value = row.bindings[var]
        if isinstance(value, tuple):
            bindings[var] = {
                "kind": "path",
                "edges": [
                    {
                        "src": graph.edge(eid).src,
                        "dst": graph.edge(eid).dst,
                        "type": graph.edge(eid).type.value,
                        "confidence": graph.edge(eid).confidence,
                        "evidence_text": graph.edge(eid).evidence_text,
                    }
                    for eid in value
                ],
            }
        else:
            node = graph.node(value)
            bindings[var] = {
                "kind": "node",
                "id": node.id,
                "label": node.label.value,
                "name": node.canonical_name,
            }
    out: dict[str, Any] = {"bindings": bindings}
    if row.evidence is not None:
        out["evidence"] = [{"chunk_id": cid, "text": text} for cid, text in row.evidence]
    return out
