"""Graph-pattern query language: parse, plan, execute, backtrack evidence."""

from .ast import EdgePattern, Filter, NodePattern, PathPattern, Query
from .executor import ResultRow, backtrack_evidence, execute, row_to_dict
from .nlq import compile_nl, schema_metadata
from .parser import format_query, parse

__all__ = [
    "EdgePattern",
    "Filter",
    "NodePattern",
    "PathPattern",
    "Query",
    "ResultRow",
    "backtrack_evidence",
    "compile_nl",
    "execute",
    "format_query",
    "parse",
    "row_to_dict",
    "schema_metadata",
]
