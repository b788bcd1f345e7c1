from __future__ import annotations

import random

import pytest

from conftest import make_star_graph
from queryoracle import oracle_execute, random_graph, random_query
from tracekg.clients import ScriptedCompletionClient
from tracekg.errors import CompileError, ParseError, TransportError
from tracekg.graph import EdgeType, NodeLabel, PropertyGraph
from tracekg.querylang import (
    backtrack_evidence,
    compile_nl,
    execute,
    format_query,
    parse,
    schema_metadata,
)
from tracekg.querylang.nlq import render_nl_prompt


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def test_parse_basic_query_shape():
    q = parse('MATCH (p:Process "sintering")-[:EMITS]->(v:VOCSpecies) RETURN v')
    assert len(q.paths) == 1
    path = q.paths[0]
    assert len(path.nodes) == 2
    assert len(path.edges) == 1
    assert path.nodes[0].label is NodeLabel.PROCESS
    assert path.nodes[0].name == "sintering"
    assert path.edges[0].types == frozenset({EdgeType.EMITS})
    assert q.returns == ["v"]


def test_reversed_hop_range_rejected():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a)-[*3..1]->(b) RETURN a")
    assert exc_info.value.code == "invalid_hops"


def test_hop_range_above_cap_rejected():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a)-[*1..9]->(b) RETURN a")
    assert exc_info.value.code == "invalid_hops"


def test_unknown_label_code():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a:Foo) RETURN a")
    assert exc_info.value.code == "unknown_label"


def test_unknown_edge_type_code():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a)-[:FRIENDS_WITH]->(b) RETURN a")
    assert exc_info.value.code == "unknown_edge_type"


def test_unbound_projection_code():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a) RETURN z")
    assert exc_info.value.code == "unbound_variable"


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a RETURN a")
    assert exc_info.value.code == "syntax"
    assert exc_info.value.line == 1
    assert exc_info.value.column > 1


def test_disconnected_patterns_rejected():
    with pytest.raises(ParseError) as exc_info:
        parse("MATCH (a)-[:EMITS]->(b), (c)-[:EMITS]->(d) RETURN a")
    assert exc_info.value.code == "disconnected_pattern"
    # sharing a variable is fine
    parse("MATCH (a)-[:EMITS]->(b), (b)-[:MEASURED_BY]->(c) RETURN a, c")


def test_parse_print_parse_identity_on_text_queries():
    samples = [
        'MATCH (p:Process "sintering")-[:EMITS]->(v:VOCSpecies) RETURN v',
        'MATCH (a)-[e:EMITS|CO_OCCURS_IN*1..3]->(b) WHERE e.confidence >= 0.5 RETURN a, b WITH_EVIDENCE LIMIT 20',
        'MATCH (c:Chunk)<-[m:MENTIONS]-(x) RETURN c',
        'MATCH (a "name with \\"quotes\\"") RETURN a',
        "MATCH (a)-[:EMITS]->(b), (b)-[]->(c) WHERE a.label = \"Process\" RETURN c LIMIT 3",
    ]
    for text in samples:
        first = parse(text)
        assert parse(format_query(first)) == first


def test_parse_print_parse_identity_on_random_asts():
    rng = random.Random(17)
    for _ in range(60):
        graph = random_graph(rng, max_nodes=10)
        query = random_query(rng, graph)
        assert parse(format_query(query)) == query


# ----------------------------------------------------------------------
# executor on fixtures
# ----------------------------------------------------------------------


def test_star_fixture_mentions_query(star_graph):
    rows = execute(parse("MATCH (c:Chunk)-[:MENTIONS]->(e) RETURN e"), star_graph)
    assert len(rows) == 5


def test_no_match_is_empty_list(star_graph):
    rows = execute(parse('MATCH (p:Process "nonexistent") RETURN p'), star_graph)
    assert rows == []


def test_two_hop_path_rows():
    g = PropertyGraph()
    a = g.merge_node(NodeLabel.PROCESS, "a")
    b = g.merge_node(NodeLabel.VOC_SPECIES, "b")
    c = g.merge_node(NodeLabel.METHOD, "c")
    g.merge_edge(a, b, EdgeType.EMITS)
    g.merge_edge(b, c, EdgeType.MEASURED_BY)
    rows = execute(parse('MATCH (x "a")-[*1..2]->(y) RETURN y'), g)
    assert [graph_name(g, r.bindings["y"]) for r in rows] == ["b", "c"]


def graph_name(graph, node_id):
    return graph.node(node_id).canonical_name


def test_confidence_filter():
    g = PropertyGraph()
    a = g.merge_node(NodeLabel.PROCESS, "a")
    b = g.merge_node(NodeLabel.VOC_SPECIES, "b")
    c = g.merge_node(NodeLabel.VOC_SPECIES, "c")
    g.merge_edge(a, b, EdgeType.EMITS, None, 0.9)
    g.merge_edge(a, c, EdgeType.EMITS, None, 0.3)
    rows = execute(parse("MATCH (x)-[e:EMITS]->(y) WHERE e.confidence >= 0.5 RETURN y"), g)
    assert [graph_name(g, r.bindings["y"]) for r in rows] == ["b"]


def test_direction_matters():
    g = PropertyGraph()
    a = g.merge_node(NodeLabel.PROCESS, "a")
    b = g.merge_node(NodeLabel.VOC_SPECIES, "b")
    g.merge_edge(a, b, EdgeType.EMITS)
    assert len(execute(parse('MATCH (x "b")<-[:EMITS]-(y) RETURN y'), g)) == 1
    assert len(execute(parse('MATCH (x "b")-[:EMITS]->(y) RETURN y'), g)) == 0


def test_variable_length_does_not_reuse_edges():
    g = PropertyGraph()
    a = g.merge_node(NodeLabel.PROCESS, "a")
    b = g.merge_node(NodeLabel.VOC_SPECIES, "b")
    g.merge_edge(a, b, EdgeType.CO_OCCURS_IN)
    g.merge_edge(b, a, EdgeType.CO_OCCURS_IN)
    rows = execute(parse('MATCH (x "a")-[p:CO_OCCURS_IN*1..4]->(y) RETURN y'), g)
    # paths: a->b and a->b->a; the 2-edge cycle cannot be walked twice
    assert len(rows) == 2


def test_determinism_identical_row_order(star_graph):
    query = parse("MATCH (c:Chunk)-[:MENTIONS]->(e) RETURN e")
    first = [r.bindings for r in execute(query, star_graph)]
    second = [r.bindings for r in execute(query, star_graph)]
    assert first == second


def test_limit_applied_after_ordering(star_graph):
    query = parse("MATCH (c:Chunk)-[:MENTIONS]->(e) RETURN e LIMIT 2")
    rows = execute(query, star_graph)
    assert len(rows) == 2
    all_rows = execute(parse("MATCH (c:Chunk)-[:MENTIONS]->(e) RETURN e"), star_graph)
    assert [r.bindings for r in rows] == [r.bindings for r in all_rows[:2]]


# ----------------------------------------------------------------------
# evidence backtracking
# ----------------------------------------------------------------------


def _multi_chunk_graph() -> PropertyGraph:
    g = PropertyGraph()
    benzene = g.merge_node(NodeLabel.VOC_SPECIES, "benzene")
    toluene = g.merge_node(NodeLabel.VOC_SPECIES, "toluene")
    g.merge_edge(benzene, toluene, EdgeType.CO_OCCURS_IN)
    for i in range(3):
        chunk = g.merge_node(
            NodeLabel.CHUNK, f"c-{i}",
            attributes={"chunk_id": f"c-{i}", "doc_id": "d", "text": f"text {i}"},
        )
        g.merge_edge(chunk, benzene, EdgeType.MENTIONS)
    shared = g.merge_node(
        NodeLabel.CHUNK, "c-9",
        attributes={"chunk_id": "c-9", "doc_id": "d", "text": "shared text"},
    )
    g.merge_edge(shared, benzene, EdgeType.MENTIONS)
    g.merge_edge(shared, toluene, EdgeType.MENTIONS)
    return g


def test_evidence_cap():
    g = _multi_chunk_graph()
    rows = execute(parse('MATCH (v "benzene") RETURN v'), g)
    backtrack_evidence(rows, g, per_node_cap=2)
    assert len(rows[0].evidence) == 2


def test_evidence_empty_when_no_chunks():
    g = PropertyGraph()
    g.merge_node(NodeLabel.VOC_SPECIES, "benzene")
    rows = execute(parse('MATCH (v "benzene") RETURN v'), g)
    backtrack_evidence(rows, g)
    assert rows == rows and rows[0].evidence == []


def test_evidence_shared_chunk_deduplicated():
    g = _multi_chunk_graph()
    rows = execute(parse('MATCH (a "benzene")-[:CO_OCCURS_IN]->(b "toluene") RETURN a, b'), g)
    backtrack_evidence(rows, g, per_node_cap=5)
    chunk_ids = [cid for cid, _ in rows[0].evidence]
    assert len(chunk_ids) == len(set(chunk_ids))
    assert "c-9" in chunk_ids
    assert chunk_ids == sorted(chunk_ids)


def test_evidence_soundness():
    g = _multi_chunk_graph()
    rows = execute(parse("MATCH (c:Chunk)-[:MENTIONS]->(e) RETURN e WITH_EVIDENCE"), g)
    for row in rows:
        node_ids = [v for v in row.bindings.values() if isinstance(v, int)]
        for chunk_id, _ in row.evidence:
            chunk = g.find_node(chunk_id)
            adjacent = {e.dst for e in g.out_edges(chunk.id, {EdgeType.MENTIONS})}
            assert adjacent & set(node_ids)


# ----------------------------------------------------------------------
# oracle equivalence
# ----------------------------------------------------------------------


def test_executor_matches_oracle_smoke():
    rng = random.Random(20260808)
    for case in range(100):
        graph = random_graph(rng, max_nodes=12)
        query = random_query(rng, graph)
        got = [r.bindings for r in execute(query, graph)]
        expected = oracle_execute(query, graph)
        assert got == expected, f"case {case}: {format_query(query)}"


def test_executor_matches_oracle_larger_single_pattern():
    rng = random.Random(31337)
    for case in range(15):
        graph = random_graph(rng, max_nodes=200)
        query = random_query(rng, graph, max_edge_patterns=1)
        got = [r.bindings for r in execute(query, graph)]
        expected = oracle_execute(query, graph)
        assert got == expected, f"case {case}: {format_query(query)}"


# ----------------------------------------------------------------------
# natural-language compilation
# ----------------------------------------------------------------------


def test_compile_nl_with_valid_scripted_reply():
    client = ScriptedCompletionClient(['MATCH (p:Process "sintering")-[:EMITS]->(v) RETURN v'])
    query = compile_nl("What does sintering emit?", client=client)
    assert query.returns == ["v"]


def test_compile_nl_retries_once_then_fails():
    client = ScriptedCompletionClient(["not a query", "still not a query"])
    with pytest.raises(CompileError) as exc_info:
        compile_nl("What does sintering emit?", client=client)
    assert len(exc_info.value.attempts) == 2
    assert len(client.calls) == 2


def test_compile_nl_second_attempt_can_succeed():
    client = ScriptedCompletionClient(["garbage", "MATCH (a:Process) RETURN a"])
    query = compile_nl("processes?", client=client)
    assert query.returns == ["a"]


def test_compile_nl_strips_code_fences():
    client = ScriptedCompletionClient(["```\nMATCH (a:Process) RETURN a\n```"])
    assert compile_nl("q", client=client).returns == ["a"]


def test_compile_nl_transport_failure_propagates():
    client = ScriptedCompletionClient([TransportError("down")])
    with pytest.raises(TransportError):
        compile_nl("q", client=client)


def test_prompt_lists_full_schema_inventory():
    metadata = schema_metadata()
    assert len(metadata["labels"]) == 11
    assert len(metadata["edge_types"]) == 12
    prompt = render_nl_prompt("What does sintering emit?")
    for label in metadata["labels"]:
        assert label in prompt
    for edge_type in metadata["edge_types"]:
        assert edge_type in prompt
    assert "What does sintering emit?" in prompt
