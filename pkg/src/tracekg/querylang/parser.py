"""Tokenizer, recursive-descent parser, and printer for the query grammar.

Grammar (EBNF, also in docs/query-language.md):

    query   = "MATCH" path { "," path }
              [ "WHERE" cond { "AND" cond } ]
              "RETURN" var { "," var } [ "WITH_EVIDENCE" ] [ "LIMIT" INT ]
    path    = node { edge node }
    node    = "(" [ var ] [ ":" LABEL ] [ STRING ] ")"
    edge    = "-[" [ var ] [ ":" TYPE { "|" TYPE } ] [ "*" INT ".." INT ] "]->"
            | "<-[" [ var ] [ ":" TYPE { "|" TYPE } ] [ "*" INT ".." INT ] "]-"
    cond    = var "." IDENT ( ">=" | "<=" | ">" | "<" | "=" | "!=" ) value
    value   = STRING | NUMBER | "true" | "false"

Keywords are case-insensitive. Parse errors carry a distinct code plus the
1-based line/column of the offending token.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError, ValidationError
from ..graph import EdgeType, NodeLabel
from .ast import MAX_HOPS, EdgePattern, Filter, NodePattern, PathPattern, Query

_KEYWORDS = {"MATCH", "WHERE", "AND", "RETURN", "WITH_EVIDENCE", "LIMIT"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct><-|->|>=|<=|!=|\.\.|[()\[\]:|*,.\-<>=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # string | number | ident | punct | eof
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", "syntax", line, col)
        kind = match.lastgroup or "ws"
        raw = match.group()
        if kind != "ws":
            tokens.append(Token(kind, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            col = len(raw) - raw.rfind("\n")
        else:
            col += len(raw)
        pos = match.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0
        self.anon_nodes = 0
        self.anon_edges = 0

    # -- token helpers -------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _error(self, message: str, code: str = "syntax", token: Token | None = None) -> ParseError:
        token = token or self.current
        return ParseError(message, code, token.line, token.column)

    def accept_punct(self, text: str) -> bool:
        if self.current.kind == "punct" and self.current.text == text:
            self.index += 1
            return True
        return False

    def expect_punct(self, text: str) -> Token:
        if not (self.current.kind == "punct" and self.current.text == text):
            raise self._error(f"expected {text!r}, found {self.current.text or 'end of query'!r}")
        token = self.current
        self.index += 1
        return token

    def accept_keyword(self, word: str) -> bool:
        if self.current.kind == "ident" and self.current.text.upper() == word:
            self.index += 1
            return True
        return False

    def expect_keyword(self, word: str) -> None:
        if not self.accept_keyword(word):
            raise self._error(f"expected {word}, found {self.current.text or 'end of query'!r}")

    def accept_variable(self) -> str | None:
        token = self.current
        if token.kind == "ident" and token.text.upper() not in _KEYWORDS:
            if token.text.startswith("_"):
                raise self._error("variables starting with '_' are reserved", token=token)
            self.index += 1
            return token.text
        return None

    def expect_variable(self) -> str:
        var = self.accept_variable()
        if var is None:
            raise self._error(f"expected a variable, found {self.current.text or 'end of query'!r}")
        return var

    def expect_int(self) -> tuple[int, Token]:
        token = self.current
        if token.kind != "number" or "." in token.text:
            raise self._error("expected an integer")
        self.index += 1
        return int(token.text), token

    # -- grammar -------------------------------------------------------

    def parse_query(self) -> Query:
        self.expect_keyword("MATCH")
        paths = [self.parse_path()]
        while self.accept_punct(","):
            paths.append(self.parse_path())
        filters: list[Filter] = []
        if self.accept_keyword("WHERE"):
            filters.append(self.parse_condition())
            while self.accept_keyword("AND"):
                filters.append(self.parse_condition())
        return_token = self.current
        self.expect_keyword("RETURN")
        returns = [self.expect_variable()]
        while self.accept_punct(","):
            returns.append(self.expect_variable())
        with_evidence = self.accept_keyword("WITH_EVIDENCE")
        limit: int | None = None
        if self.accept_keyword("LIMIT"):
            limit, limit_token = self.expect_int()
            if limit < 0:
                raise self._error("LIMIT must be >= 0", token=limit_token)
        if self.current.kind != "eof":
            raise self._error(f"unexpected trailing input {self.current.text!r}")
        query = Query(paths=paths, filters=filters, returns=returns,
                      with_evidence=with_evidence, limit=limit)
        self._validate(query, return_token)
        return query

    def parse_path(self) -> PathPattern:
        nodes = [self.parse_node()]
        edges: list[EdgePattern] = []
        while self.current.kind == "punct" and self.current.text in ("-", "<-"):
            edges.append(self.parse_edge())
            nodes.append(self.parse_node())
        return PathPattern(nodes=nodes, edges=edges)

    def parse_node(self) -> NodePattern:
        self.expect_punct("(")
        var = self.accept_variable()
        anonymous = var is None
        if anonymous:
            var = f"_n{self.anon_nodes}"
            self.anon_nodes += 1
        label: NodeLabel | None = None
        if self.accept_punct(":"):
            token = self.current
            if token.kind != "ident":
                raise self._error("expected a node label after ':'")
            self.index += 1
            try:
                label = NodeLabel.parse(token.text)
            except ValidationError:
                raise self._error(f"unknown node label {token.text!r}", "unknown_label", token) from None
        name: str | None = None
        if self.current.kind == "string":
            name = _unquote(self.current.text)
            self.index += 1
        self.expect_punct(")")
        return NodePattern(var=var, label=label, name=name, anonymous=anonymous)

    def parse_edge(self) -> EdgePattern:
        if self.accept_punct("<-"):
            direction = "in"
            closer = "-"
        else:
            self.expect_punct("-")
            direction = "out"
            closer = "->"
        self.expect_punct("[")
        var = self.accept_variable()
        anonymous = var is None
        if anonymous:
            var = f"_e{self.anon_edges}"
            self.anon_edges += 1
        types: frozenset[EdgeType] | None = None
        if self.accept_punct(":"):
            collected = [self._parse_edge_type()]
            while self.accept_punct("|"):
                collected.append(self._parse_edge_type())
            types = frozenset(collected)
        min_hops, max_hops = 1, 1
        if self.accept_punct("*"):
            star_token = self.tokens[self.index - 1]
            min_hops, _ = self.expect_int()
            self.expect_punct("..")
            max_hops, _ = self.expect_int()
            if not 1 <= min_hops <= max_hops <= MAX_HOPS:
                raise self._error(
                    f"hop range must satisfy 1 <= min <= max <= {MAX_HOPS}, got *{min_hops}..{max_hops}",
                    "invalid_hops",
                    star_token,
                )
        self.expect_punct("]")
        self.expect_punct(closer)
        return EdgePattern(
            var=var, types=types, direction=direction,
            min_hops=min_hops, max_hops=max_hops, anonymous=anonymous,
        )

    def _parse_edge_type(self) -> EdgeType:
        token = self.current
        if token.kind != "ident":
            raise self._error("expected an edge type")
        self.index += 1
        try:
            return EdgeType.parse(token.text)
        except ValidationError:
            raise self._error(f"unknown edge type {token.text!r}", "unknown_edge_type", token) from None

    def parse_condition(self) -> Filter:
        var = self.expect_variable()
        self.expect_punct(".")
        attr_token = self.current
        if attr_token.kind != "ident":
            raise self._error("expected an attribute name after '.'")
        self.index += 1
        op: str | None = None
        for candidate in (">=", "<=", "!=", "=", ">", "<"):
            if self.accept_punct(candidate):
                op = candidate
                break
        if op is None:
            raise self._error("expected a comparison operator")
        value = self._parse_value()
        return Filter(var=var, attribute=attr_token.text, op=op, value=value)

    def _parse_value(self) -> str | int | float | bool:
        token = self.current
        if token.kind == "string":
            self.index += 1
            return _unquote(token.text)
        if token.kind == "number":
            self.index += 1
            return float(token.text) if "." in token.text else int(token.text)
        if token.kind == "ident" and token.text.lower() in ("true", "false"):
            self.index += 1
            return token.text.lower() == "true"
        raise self._error("expected a string, number, or boolean value")

    def _validate(self, query: Query, return_token: Token) -> None:
        bound = set(query.variables())
        for var in query.returns:
            if var not in bound:
                raise ParseError(
                    f"projected variable {var!r} is not bound by any pattern",
                    "unbound_variable",
                    return_token.line,
                    return_token.column,
                )
        for flt in query.filters:
            if flt.var not in bound:
                raise ParseError(
                    f"filter variable {flt.var!r} is not bound by any pattern",
                    "unbound_variable",
                    return_token.line,
                    return_token.column,
                )
        connected: set[str] = set(query.paths[0].variables())
        for path in query.paths[1:]:
            path_vars = set(path.variables())
            if not (path_vars & connected):
                raise ParseError(
                    "patterns must form a connected chain or tree (share a variable)",
                    "disconnected_pattern",
                    return_token.line,
                    return_token.column,
                )
            connected |= path_vars


def _unquote(literal: str) -> str:
    body = literal[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse(query_text: str) -> Query:
    """Parse query text into an AST; raises :class:`ParseError` with position."""
    return _Parser(query_text).parse_query()


def format_query(query: Query) -> str:
    """Canonical text for an AST; parse(format_query(q)) == q."""
    parts = ["MATCH "]
    rendered_paths = []
    for path in query.paths:
        bits = []
        for i, node in enumerate(path.nodes):
            inner = "" if node.anonymous else node.var
            if node.label is not None:
                inner += f":{node.label.value}"
            if node.name is not None:
                inner += (" " if inner else "") + _quote(node.name)
            bits.append(f"({inner})")
            if i < len(path.edges):
                edge = path.edges[i]
                body = "" if edge.anonymous else edge.var
                if edge.types is not None:
                    body += ":" + "|".join(sorted(t.value for t in edge.types))
                if edge.variable_length:
                    body += f"*{edge.min_hops}..{edge.max_hops}"
                if edge.direction == "out":
                    bits.append(f"-[{body}]->")
                else:
                    bits.append(f"<-[{body}]-")
        rendered_paths.append("".join(bits))
    parts.append(", ".join(rendered_paths))
    if query.filters:
        conds = []
        for flt in query.filters:
            value = flt.value
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, str):
                rendered = _quote(value)
            else:
                rendered = repr(value)
            conds.append(f"{flt.var}.{flt.attribute} {flt.op} {rendered}")
        parts.append(" WHERE " + " AND ".join(conds))
    parts.append(" RETURN " + ", ".join(query.returns))
    if query.with_evidence:
        parts.append(" WITH_EVIDENCE")
    if query.limit is not None:
        parts.append(f" LIMIT {query.limit}")
    return "".join(parts)
