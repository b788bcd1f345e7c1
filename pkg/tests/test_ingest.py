from __future__ import annotations

import random

import pytest

from helpers import record
from tracekg.errors import ValidationError
from tracekg.graph import EdgeType, NodeLabel, PropertyGraph, structurally_equal
from tracekg.ingest import BatchConfig, ingest_records, is_measurement_token
from tracekg.normalize import NormalizationDictionary
from tracekg.records import EntityMention, RelationSpec


def test_single_record_counts():
    g = PropertyGraph()
    stats = ingest_records([record()], g)
    # 1 chunk + 3 entities; 3 MENTIONS + 1 EMITS
    assert g.node_count == 4
    assert stats.nodes_created == 4
    assert stats.mentions_created == 3
    assert g.edge_count == 4
    report = g.topology_report()
    assert report.relation_histogram == {"MENTIONS": 3, "EMITS": 1}


def test_reingest_is_idempotent():
    g = PropertyGraph()
    ingest_records([record()], g)
    snapshot_nodes, snapshot_edges = g.node_count, g.edge_count
    ingest_records([record()], g)
    assert (g.node_count, g.edge_count) == (snapshot_nodes, snapshot_edges)


def test_invalid_record_rejected_batch_continues():
    bad = record("c-2")
    bad.relations[0] = RelationSpec("ghost", "Process", "benzene", "VOCSpecies", "EMITS")
    stats_graph = PropertyGraph()
    stats = ingest_records([record("c-1"), bad, record("c-3")], stats_graph)
    assert stats.records_ingested == 2
    assert stats.records_rejected == 1
    assert stats.rejections[0]["chunk_id"] == "c-2"
    chunk_ids = {
        n.attributes["chunk_id"] for n in stats_graph.nodes() if n.label is NodeLabel.CHUNK
    }
    assert chunk_ids == {"c-1", "c-3"}


def test_mid_batch_failure_leaves_graph_unchanged():
    g = PropertyGraph()
    ingest_records([record("c-0")], g)
    nodes_before, edges_before = g.node_count, g.edge_count

    calls = []

    def bomb(rec):
        calls.append(rec.chunk_id)
        if rec.chunk_id == "c-2":
            raise RuntimeError("injected")

    with pytest.raises(RuntimeError):
        ingest_records(
            [record("c-1"), record("c-2"), record("c-3")],
            g,
            config=BatchConfig(batch_size=10),
            failure_hook=bomb,
        )
    assert (g.node_count, g.edge_count) == (nodes_before, edges_before)
    assert calls == ["c-1", "c-2"]


def test_order_independence():
    records = [
        record("c-1", entities={"Process": ["sintering"], "VOCSpecies": ["benzene"]},
               relations=[("sintering", "Process", "benzene", "VOCSpecies", "EMITS", "ev1", 0.8)]),
        record("c-2", entities={"Process": ["sintering"], "ControlTech": ["RTO"]},
               relations=[("sintering", "Process", "RTO", "ControlTech", "CONTROLLED_BY", "ev2", 0.7)]),
        record("c-3", entities={"VOCSpecies": ["benzene"], "Method": ["GC-MS"]},
               relations=[("benzene", "VOCSpecies", "GC-MS", "Method", "MEASURED_BY", "ev3", 0.9)]),
    ]
    rng = random.Random(5)
    base = PropertyGraph()
    ingest_records(records, base)
    for _ in range(5):
        shuffled = records[:]
        rng.shuffle(shuffled)
        other = PropertyGraph()
        ingest_records(shuffled, other, config=BatchConfig(batch_size=2))
        assert structurally_equal(base, other)


def test_grounding_every_entity_has_mentions_in_edge():
    g = PropertyGraph()
    ingest_records([record("c-1"), record("c-2", entities={"Factor": ["humidity"]}, relations=[])], g)
    for node in g.nodes():
        if node.label is NodeLabel.CHUNK:
            continue
        assert any(e.type is EdgeType.MENTIONS for e in g.in_edges(node.id)), node.canonical_name


def test_normalization_applied_with_alias_retained():
    g = PropertyGraph()
    d = NormalizationDictionary({"rto": "regenerative thermal oxidizer"})
    rec = record(
        entities={"Process": ["sintering"], "ControlTech": ["RTO"]},
        relations=[("sintering", "Process", "RTO", "ControlTech", "CONTROLLED_BY", None, 0.8)],
    )
    ingest_records([rec], g, dictionary=d)
    node = g.find_node("regenerative thermal oxidizer")
    assert node is not None
    assert "RTO" in node.aliases
    assert g.get_node_id(NodeLabel.CONTROL_TECH, "RTO") is None


def test_numeric_observation_stored_as_chunk_attribute():
    rec = record(
        entities={"Process": ["sintering"], "Observation": ["11.14 g/t"]},
        relations=[],
    )
    g = PropertyGraph()
    stats = ingest_records([rec], g)
    assert stats.observation_attributes == 1
    assert g.get_node_id(NodeLabel.OBSERVATION, "11.14 g/t") is None
    chunk = g.find_node("c-1")
    assert chunk.attributes["observations"] == ["11.14 g/t"]


def test_relation_referenced_observation_stays_a_node():
    rec = record(
        entities={"Process": ["sintering"], "Observation": ["11.14 g/t"]},
        relations=[("11.14 g/t", "Observation", "sintering", "Process", "MEASURES", None, 0.9)],
    )
    g = PropertyGraph()
    ingest_records([rec], g)
    assert g.get_node_id(NodeLabel.OBSERVATION, "11.14 g/t") is not None


def test_ungrounded_mode_creates_no_chunks_or_mentions():
    g = PropertyGraph()
    ingest_records([record()], g, ground_chunks=False)
    assert g.node_count == 3
    assert all(n.label is not NodeLabel.CHUNK for n in g.nodes())
    assert all(e.type is not EdgeType.MENTIONS for e in g.edges())


def test_batch_config_validates():
    with pytest.raises(ValidationError):
        BatchConfig(batch_size=0)


@pytest.mark.parametrize(
    "token,expected",
    [
        ("11.14 g/t", True),
        ("0.9973 mg/m3", True),
        ("25%", True),
        ("~450 °C", True),
        ("120", True),
        ("benzene", False),
        ("GC-MS", False),
        ("high humidity", False),
        ("", False),
    ],
)
def test_measurement_token_detection(token, expected):
    assert is_measurement_token(token) is expected
