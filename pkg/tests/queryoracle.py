"""Brute-force binding enumerator: the independent oracle for the executor.

Enumerates the full cross-product of node-variable assignments, checks node
constraints, and satisfies each edge pattern from an exhaustive pre-computed
table of all edge paths (per pattern) in the graph. Shares no code with the
executor beyond the AST. Also generates random graphs and random ASTs.
"""
from __future__ import annotations

import itertools
import random

from tracekg.graph import EdgeType, NodeLabel, PropertyGraph
from tracekg.querylang.ast import EdgePattern, Filter, NodePattern, PathPattern, Query

_LABELS = [NodeLabel.PROCESS, NodeLabel.VOC_SPECIES, NodeLabel.FACTOR]
_TYPES = [EdgeType.EMITS, EdgeType.CO_OCCURS_IN, EdgeType.MEASURED_BY]


def _all_paths_for_pattern(graph: PropertyGraph, pattern: EdgePattern) -> dict[tuple[int, int], list[tuple[int, ...]]]:
    """Every edge path satisfying the pattern, bucketed by (start, end)."""
    adjacency: dict[int, list] = {n.id: [] for n in graph.nodes()}
    for edge in graph.edges():
        if pattern.types is not None and edge.type not in pattern.types:
            continue
        if pattern.direction == "out":
            adjacency[edge.src].append((edge.id, edge.dst))
        else:
            adjacency[edge.dst].append((edge.id, edge.src))
    table: dict[tuple[int, int], list[tuple[int, ...]]] = {}

    def walk(start: int, current: int, used: set[int], path: tuple[int, ...]) -> None:
        if pattern.min_hops <= len(path) <= pattern.max_hops:
            table.setdefault((start, current), []).append(path)
        if len(path) >= pattern.max_hops:
            return
        for edge_id, nxt in adjacency[current]:
            if edge_id not in used:
                walk(start, nxt, used | {edge_id}, path + (edge_id,))

    for node in graph.nodes():
        walk(node.id, node.id, set(), ())
    return table


def _filter_value(graph, var_binding, attribute):
    if isinstance(var_binding, tuple):
        return None  # handled per edge by caller
    node = graph.node(var_binding)
    if attribute in ("name", "canonical_name"):
        return node.canonical_name
    if attribute == "label":
        return node.label.value
    if attribute == "id":
        return node.id
    return node.attributes.get(attribute)


def _cmp(actual, op, expected) -> bool:
    if actual is None:
        return False
    if op == "=":
        return actual == expected
    if op == "!=":
        return actual != expected
    if isinstance(actual, bool) or isinstance(expected, bool):
        return False
    both_num = isinstance(actual, (int, float)) and isinstance(expected, (int, float))
    both_str = isinstance(actual, str) and isinstance(expected, str)
    if not (both_num or both_str):
        return False
    if op == ">=":
        return actual >= expected
    if op == "<=":
        return actual <= expected
    if op == ">":
        return actual > expected
    return actual < expected


def _edge_filter_value(graph, edge_id, attribute):
    edge = graph.edge(edge_id)
    if attribute == "confidence":
        return edge.confidence
    if attribute == "type":
        return edge.type.value
    if attribute == "evidence_text":
        return edge.evidence_text
    return None


def _filter_passes(graph, flt: Filter, binding) -> bool:
    if isinstance(binding, tuple):
        return all(_cmp(_edge_filter_value(graph, eid, flt.attribute), flt.op, flt.value) for eid in binding)
    return _cmp(_filter_value(graph, binding, flt.attribute), flt.op, flt.value)


def oracle_execute(query: Query, graph: PropertyGraph) -> list[dict]:
    node_vars = query.node_variables()
    all_ids = [n.id for n in graph.nodes()]
    pattern_tables = []  # (edge var, src var, dst var, table)
    for path in query.paths:
        for i, edge_pattern in enumerate(path.edges):
            table = _all_paths_for_pattern(graph, edge_pattern)
            pattern_tables.append((edge_pattern.var, path.nodes[i].var, path.nodes[i + 1].var, table))

    matches: list[dict] = []
    for assignment in itertools.product(all_ids, repeat=len(node_vars)):
        env = dict(zip(node_vars, assignment))
        ok = True
        for path in query.paths:
            for node_pattern in path.nodes:
                node = graph.node(env[node_pattern.var])
                if node_pattern.label is not None and node.label is not node_pattern.label:
                    ok = False
                    break
                if node_pattern.name is not None and node.canonical_name != node_pattern.name:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        option_lists = []
        for _, src_var, dst_var, table in pattern_tables:
            options = table.get((env[src_var], env[dst_var]), [])
            if not options:
                option_lists = None
                break
            option_lists.append(options)
        if option_lists is None:
            continue
        for combo in itertools.product(*option_lists):
            full = dict(env)
            consistent = True
            for (edge_var, _, _, _), chosen in zip(pattern_tables, combo):
                if edge_var in full and full[edge_var] != chosen:
                    consistent = False
                    break
                full[edge_var] = chosen
            if consistent:
                matches.append(full)

    matches = [
        m for m in matches
        if all(_filter_passes(graph, flt, m[flt.var]) for flt in query.filters)
    ]

    ordered_vars = query.variables()

    def key(match: dict) -> tuple:
        return tuple(
            match[v] if isinstance(match[v], tuple) else (match[v],) for v in ordered_vars
        )

    matches.sort(key=key)
    if query.limit is not None:
        matches = matches[: query.limit]
    return matches


# ----------------------------------------------------------------------
# random instances
# ----------------------------------------------------------------------


def random_graph(rng: random.Random, max_nodes: int = 30) -> PropertyGraph:
    graph = PropertyGraph()
    n = rng.randint(3, max_nodes)
    ids = [graph.merge_node(rng.choice(_LABELS), f"n{i}") for i in range(n)]
    for _ in range(rng.randint(n // 2, 2 * n)):
        a, b = rng.choice(ids), rng.choice(ids)
        if a != b:
            graph.merge_edge(a, b, rng.choice(_TYPES), None, round(rng.random(), 2))
    return graph


def random_query(rng: random.Random, graph: PropertyGraph, max_edge_patterns: int = 3) -> Query:
    n_edges = rng.randint(1, max_edge_patterns)
    var_pool = ["a", "b", "c", "d", "e"]
    names = [n.canonical_name for n in graph.nodes()]
    nodes: list[NodePattern] = []
    edges: list[EdgePattern] = []
    used_vars: list[str] = []
    for i in range(n_edges + 1):
        if used_vars and rng.random() < 0.15:
            var = rng.choice(used_vars)  # homomorphic reuse
        else:
            var = var_pool[len(used_vars) % len(var_pool)] + str(len(used_vars))
            used_vars.append(var)
        label = rng.choice(_LABELS) if rng.random() < 0.4 else None
        name = rng.choice(names) if rng.random() < 0.25 and names else None
        nodes.append(NodePattern(var=var, label=label, name=name))
        if i < n_edges:
            if rng.random() < 0.25:
                min_hops = rng.randint(1, 2)
                max_hops = min_hops + rng.randint(0, 1)
            else:
                min_hops = max_hops = 1
            types = frozenset(rng.sample(_TYPES, rng.randint(1, 2))) if rng.random() < 0.5 else None
            edges.append(
                EdgePattern(
                    var=f"r{i}",
                    types=types,
                    direction=rng.choice(["out", "in"]),
                    min_hops=min_hops,
                    max_hops=max_hops,
                )
            )
    query = Query(paths=[PathPattern(nodes=nodes, edges=edges)])
    bound = query.variables()
    query.returns = rng.sample(bound, rng.randint(1, len(bound)))
    if rng.random() < 0.3:
        query.filters = [Filter(var=edges[0].var, attribute="confidence", op=">=", value=round(rng.random(), 2))]
    if rng.random() < 0.25:
        query.limit = rng.randint(0, 10)
    return query
