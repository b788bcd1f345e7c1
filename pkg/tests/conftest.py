from __future__ import annotations

import pytest

from tracekg.graph import EdgeType, NodeLabel, PropertyGraph


def make_star_graph() -> PropertyGraph:
    """One chunk mentioning five entities: 6 nodes, 5 MENTIONS edges."""
    g = PropertyGraph()
    chunk = g.merge_node(
        NodeLabel.CHUNK,
        "c-1",
        attributes={"chunk_id": "c-1", "doc_id": "d-1", "text": "sintering emits benzene and toluene."},
    )
    entities = [
        (NodeLabel.PROCESS, "sintering"),
        (NodeLabel.VOC_SPECIES, "benzene"),
        (NodeLabel.VOC_SPECIES, "toluene"),
        (NodeLabel.CONTROL_TECH, "regenerative thermal oxidizer"),
        (NodeLabel.METHOD, "GC-MS"),
    ]
    for label, name in entities:
        nid = g.merge_node(label, name)
        g.merge_edge(chunk, nid, EdgeType.MENTIONS)
    return g


@pytest.fixture
def star_graph() -> PropertyGraph:
    return make_star_graph()
