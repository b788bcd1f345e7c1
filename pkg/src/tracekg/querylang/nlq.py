"""Natural-language to query compilation through a completion client.

The prompt carries the full label/edge-type inventory and a grammar summary;
the reply must be a single query. One retry with the parse error appended is
allowed; after that the failure is surfaced, never a guessed query.
"""
from __future__ import annotations

import re

from ..clients import CompletionClient
from ..errors import CompileError, ParseError
from ..graph import EdgeType, NodeLabel
from .ast import Query
from .parser import parse

GRAMMAR_SUMMARY = (
    'MATCH (var:Label "name")-[var:TYPE|TYPE2*1..3]->(var2) '
    "WHERE var.confidence >= 0.5 RETURN var, var2 WITH_EVIDENCE LIMIT 20"
)


def schema_metadata() -> dict:
    """Label/edge-type inventory plus the grammar hint, for prompt grounding."""
    return {
        "labels": [label.value for label in NodeLabel],
        "edge_types": [edge_type.value for edge_type in EdgeType],
        "grammar": GRAMMAR_SUMMARY,
    }


def render_nl_prompt(question: str, metadata: dict | None = None) -> str:
    metadata = metadata or schema_metadata()
    return (
        "Translate the question into one graph-pattern query.\n"
        f"Node labels: {', '.join(metadata['labels'])}.\n"
        f"Edge types: {', '.join(metadata['edge_types'])}.\n"
        f"Grammar: {metadata['grammar']}\n"
        'Example: MATCH (p:Process "sintering")-[:EMITS]->(v:VOCSpecies) RETURN p, v WITH_EVIDENCE\n'
        f"Question: {question}\n"
        "Reply with the query only."
    )


def _extract_query_text(reply: str) -> str:
    text = re.sub(r"```[a-zA-Z]*", "", reply).replace("```", "").strip()
    match = re.search(r"\bMATCH\b", text, re.IGNORECASE)
    if match:
        text = text[match.start():]
    return text.strip()


def compile_nl(
    question: str,
    metadata: dict | None = None,
    client: CompletionClient | None = None,
) -> Query:
    """Compile a question to an AST, retrying once on parse failure."""
    if client is None:
        raise CompileError("no completion client configured")
    prompt = render_nl_prompt(question, metadata)
    reply = client.complete(prompt)
    try:
        return parse(_extract_query_text(reply))
    except ParseError as first_error:
        retry_prompt = (
            prompt
            + f"\nYour previous reply {reply!r} failed to parse: {first_error}."
            + " Reply with one corrected query only."
        )
        retry_reply = client.complete(retry_prompt)
        try:
            return parse(_extract_query_text(retry_reply))
        except ParseError as second_error:
            raise CompileError(
                f"could not compile question {question!r} into a valid query",
                attempts=[str(first_error), str(second_error)],
            ) from second_error
