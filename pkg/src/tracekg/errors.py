"""Exception hierarchy shared across the package.

Every error raised by tracekg derives from :class:`TraceKGError` and carries a
stable machine-readable ``code`` so CLI and HTTP layers can map failures
without string matching.
"""
from __future__ import annotations


class TraceKGError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(TraceKGError):
    """A precondition or type invariant was violated by the caller."""

    code = "validation"


class ReferentialError(TraceKGError):
    """An operation referenced a node or edge that does not exist."""

    code = "referential"


class SchemaError(TraceKGError):
    """A structural rule of the ontology was violated (e.g. MENTIONS source)."""

    code = "schema"


class NotFoundError(TraceKGError):
    """A lookup by id or name found nothing."""

    code = "not_found"


class EmptyGraphError(TraceKGError):
    """Topology metrics are undefined on a graph with zero nodes."""

    code = "empty_graph"


class RepairError(TraceKGError):
    """A malformed JSON line could not be repaired.

    ``position`` is the character offset of the first inconsistency found.
    """

    code = "irreparable"

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class StreamError(TraceKGError):
    """The underlying byte stream failed mid-iteration (I/O, not content)."""

    code = "stream"


class TransportError(TraceKGError):
    """A remote backend (completion or open-domain search) was unreachable."""

    code = "transport"


class ParseError(TraceKGError):
    """Query text could not be parsed.

    Carries a distinct ``code`` per failure class plus line/column of the
    offending token (1-based).
    """

    def __init__(self, message: str, code: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.code = code
        self.line = line
        self.column = column


class CompileError(TraceKGError):
    """Natural-language compilation produced no parseable query."""

    code = "nl_compile"

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class UndefinedMetricError(TraceKGError):
    """A metric's denominator is zero (constant vector, empty matrix, ...)."""

    code = "undefined_metric"
