"""Query AST dataclasses.

Anonymous patterns receive positional variables (``_n0``, ``_e1``, ...) at
parse time and remember their anonymity so printing omits them again; this
keeps parse -> print -> parse an identity on ASTs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..graph import EdgeType, NodeLabel

MAX_HOPS = 8  # configurable ceiling for variable-length traversal


@dataclass(frozen=True)
class NodePattern:
    var: str
    label: NodeLabel | None = None
    name: str | None = None
    anonymous: bool = False


@dataclass(frozen=True)
class EdgePattern:
    var: str
    types: frozenset[EdgeType] | None = None  # None matches any type
    direction: str = "out"  # "out" | "in"
    min_hops: int = 1
    max_hops: int = 1
    anonymous: bool = False

    @property
    def variable_length(self) -> bool:
        return (self.min_hops, self.max_hops) != (1, 1)


@dataclass(frozen=True)
class Filter:
    var: str
    attribute: str
    op: str  # >=, <=, >, <, =, !=
    value: str | int | float | bool


@dataclass
class PathPattern:
    nodes: list[NodePattern]
    edges: list[EdgePattern] = field(default_factory=list)

    def variables(self) -> list[str]:
        """Node and edge variables in pattern order."""
        out: list[str] = []
        for i, node in enumerate(self.nodes):
            out.append(node.var)
            if i < len(self.edges):
                out.append(self.edges[i].var)
        return out


@dataclass
class Query:
    paths: list[PathPattern]
    filters: list[Filter] = field(default_factory=list)
    returns: list[str] = field(default_factory=list)
    with_evidence: bool = False
    limit: int | None = None

    def variables(self) -> list[str]:
        """All bound variables, first-appearance order, deduplicated."""
        seen: list[str] = []
        for path in self.paths:
            for var in path.variables():
                if var not in seen:
                    seen.append(var)
        return seen

    def node_variables(self) -> list[str]:
        seen: list[str] = []
        for path in self.paths:
            for node in path.nodes:
                if node.var not in seen:
                    seen.append(node.var)
        return seen

    def edge_variables(self) -> list[str]:
        seen: list[str] = []
        for path in self.paths:
            for edge in path.edges:
                if edge.var not in seen:
                    seen.append(edge.var)
        return seen
