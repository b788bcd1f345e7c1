"""tracekg: evidence-grounded knowledge graphs with tiered, traceable retrieval."""

from .graph import Edge, EdgeType, Node, NodeLabel, PropertyGraph, TopologyReport

__version__ = "0.1.0"

__all__ = [
    "Edge",
    "EdgeType",
    "Node",
    "NodeLabel",
    "PropertyGraph",
    "TopologyReport",
    "__version__",
]
