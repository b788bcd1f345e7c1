"""Three-tier routed retrieval with a complete evidence trace.

Tier 1 anchors the question's entities in the graph and runs pattern queries
with evidence backtracking. If the assembled graph evidence falls short of
the sufficiency rules, tier 2 retrieves and reranks literature chunks from
the vector index. If grounding still fails, tier 3 queries an open-domain
search backend and answers conservatively, listing domain claims it could
not support. Every answer carries its source tier, the evidence items, and
the fallback status; when every backend is exhausted the answer says so
explicitly instead of guessing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from .clients import CompletionClient, OpenDomainClient
from .errors import TransportError, ValidationError
from .graph import EdgeType, NodeLabel, PropertyGraph
from .lexicon import TriggerLexicon, default_lexicon
from .querylang.ast import EdgePattern, NodePattern, PathPattern, Query
from .querylang.executor import ResultRow, execute, row_to_dict
from .vectors import VectorIndex, tokenize

ANSWER_TYPES = ("entity-list", "fact", "quantitative", "summary")


@dataclass(frozen=True)
class EvaluationRules:
    min_graph_rows: int = 1
    min_evidence_items: int = 1
    min_grounding_score: float = 0.35

    def __post_init__(self) -> None:
        if self.min_graph_rows < 0 or self.min_evidence_items < 0:
            raise ValidationError("row/item thresholds must be >= 0")
        if not 0.0 <= self.min_grounding_score <= 1.0:
            raise ValidationError("min_grounding_score must lie in [0, 1]")


@dataclass(frozen=True)
class RerankWeights:
    cosine: float = 0.6
    entity_overlap: float = 0.3
    numeric_density: float = 0.1


@dataclass
class ParsedIntent:
    entities: list[tuple[str, str | None]] = field(default_factory=list)  # (name, label)
    relation_intents: list[EdgeType] = field(default_factory=list)
    constraints: dict[str, Any] = field(default_factory=dict)
    expected_answer_type: str = "fact"
    unparseable: bool = False

    @property
    def tier1_eligible(self) -> bool:
        return not self.unparseable and bool(self.entities)


@dataclass
class EvidenceItem:
    kind: str  # graph-row | chunk | open-domain-extract
    payload: dict
    score: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "payload": self.payload, "score": round(self.score, 6)}


@dataclass
class EvidenceBundle:
    tier: int
    items: list[EvidenceItem] = field(default_factory=list)
    sufficiency: float = 0.0
    fallback_status: str = "none"  # none | fell-back | exhausted

    @property
    def sufficient(self) -> bool:
        return self.sufficiency >= 1.0

    def to_dict(self) -> dict:
        return {
            "tier": self.tier,
            "sufficiency": round(self.sufficiency, 6),
            "fallback_status": self.fallback_status,
            "items": [item.to_dict() for item in self.items],
        }


@dataclass
class Answer:
    text: str
    evidence: EvidenceBundle
    unresolved_claims: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "evidence": self.evidence.to_dict(),
            "unresolved_claims": self.unresolved_claims,
        }


@dataclass
class RouterClients:
    completion: CompletionClient | None = None
    open_domain: OpenDomainClient | None = None


# ----------------------------------------------------------------------
# intent parsing
# ----------------------------------------------------------------------


def _match_names(question: str, names: dict[str, tuple[str, str | None]]) -> list[tuple[str, str | None]]:
    """Longest-first, word-bounded surface matching; ordered by position."""
    found: list[tuple[int, str, str | None]] = []
    taken: list[tuple[int, int]] = []
    for surface in sorted(names, key=len, reverse=True):
        pattern = re.compile(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", re.IGNORECASE)
        for match in pattern.finditer(question):
            span = (match.start(), match.end())
            if any(s < span[1] and span[0] < e for s, e in taken):
                continue
            taken.append(span)
            canonical, label = names[surface]
            found.append((match.start(), canonical, label))
    found.sort()
    out: list[tuple[str, str | None]] = []
    for _, canonical, label in found:
        if (canonical, label) not in out:
            out.append((canonical, label))
    return out


def _answer_type(question: str, intents: list[EdgeType]) -> str:
    lowered = question.lower()
    if re.search(r"\bhow (?:much|many)\b|\bconcentration\b|\bemission factor\b|\brate\b", lowered):
        return "quantitative"
    if re.search(r"\bsummar|overview\b|\bdescribe\b", lowered):
        return "summary"
    if re.search(r"^\s*(?:what|which|list)\b", lowered) and intents:
        return "entity-list"
    return "fact"


def parse_intent(
    question: str,
    graph: PropertyGraph | None = None,
    lexicon: TriggerLexicon | None = None,
    client: CompletionClient | None = None,
) -> ParsedIntent:
    """Deterministic lexicon/graph matching; degrades to an unparseable marker.

    The optional client path refines entities/intents but never replaces the
    deterministic result; refinement failures are swallowed.
    """
    lexicon = lexicon or default_lexicon()
    names: dict[str, tuple[str, str | None]] = {}
    for surface, category in lexicon.entities.items():
        names[surface] = (surface, category)
    if graph is not None:
        for node in graph.nodes():
            if node.label is NodeLabel.CHUNK:
                continue
            names[node.canonical_name] = (node.canonical_name, node.label.value)
            for alias in node.aliases:
                names[alias] = (node.canonical_name, node.label.value)

    entities = _match_names(question, names)
    intents = lexicon.intent_types(question)

    if client is not None:
        try:
            import json as _json

            reply = client.complete(
                "Identify ontology entities and relation intents in the question. "
                'Reply as JSON {"entities": [[name, label-or-null], ...], "intents": [TYPE, ...]}.\n'
                f"Question: {question}"
            )
            refined = _json.loads(reply)
            for pair in refined.get("entities", []):
                name, label = (pair + [None])[:2] if isinstance(pair, list) else (pair, None)
                if isinstance(name, str) and name and (name, label) not in entities:
                    entities.append((name, label))
            for type_name in refined.get("intents", []):
                edge_type = EdgeType.parse(str(type_name))
                if edge_type not in intents:
                    intents.append(edge_type)
        except (TransportError, ValueError, ValidationError, KeyError, TypeError):
            pass  # refinement is best-effort

    if not entities and not intents:
        return ParsedIntent(unparseable=True, expected_answer_type=_answer_type(question, []))
    return ParsedIntent(
        entities=entities,
        relation_intents=intents,
        expected_answer_type=_answer_type(question, intents),
    )


# ----------------------------------------------------------------------
# tiers
# ----------------------------------------------------------------------


def _anchor_query(anchor_name: str, anchor_label: str | None, intents: list[EdgeType], direction: str) -> Query:
    label = NodeLabel.parse(anchor_label) if anchor_label else None
    anchor = NodePattern(var="a", label=label, name=anchor_name)
    target = NodePattern(var="x")
    edge = EdgePattern(
        var="r",
        types=frozenset(intents) if intents else None,
        direction=direction,
        min_hops=1,
        max_hops=2,
    )
    return Query(
        paths=[PathPattern(nodes=[anchor, target], edges=[edge])],
        returns=["a", "x"],
        with_evidence=True,
    )


def tier1_graph(intent: ParsedIntent, graph: PropertyGraph, rules: EvaluationRules) -> EvidenceBundle:
    """Anchored 1..2-hop pattern search with evidence backtracking."""
    if not intent.tier1_eligible:
        return EvidenceBundle(tier=1, sufficiency=0.0)
    rows: list[tuple[ResultRow, Query]] = []
    for name, label in intent.entities:
        resolved = graph.find_node(name)
        if resolved is None:
            continue
        for direction in ("out", "in"):
            query = _anchor_query(resolved.canonical_name, resolved.label.value, intent.relation_intents, direction)
            for row in execute(query, graph):
                rows.append((row, query))
        if rows:
            break  # first resolvable anchor wins; keeps the evidence focused
    items = [
        EvidenceItem(kind="graph-row", payload=row_to_dict(graph, row, query.returns), score=1.0)
        for row, query in rows
    ]
    if not items:
        return EvidenceBundle(tier=1, sufficiency=0.0)
    sufficiency = min(1.0, len(items) / max(1, rules.min_graph_rows))
    return EvidenceBundle(tier=1, items=items, sufficiency=sufficiency)


def numeric_density(text: str) -> float:
    tokens = text.split()
    if not tokens:
        return 0.0
    numeric = sum(1 for token in tokens if any(ch.isdigit() for ch in token))
    return numeric / len(tokens)


def entity_overlap(text: str, intent: ParsedIntent) -> float:
    if not intent.entities:
        return 0.0
    lowered = text.lower()
    hits = sum(1 for name, _ in intent.entities if name.lower() in lowered)
    return hits / len(intent.entities)


def tier2_vector(
    question: str,
    intent: ParsedIntent,
    index: VectorIndex,
    rules: EvaluationRules,
    k: int = 5,
    weights: RerankWeights = RerankWeights(),
) -> EvidenceBundle:
    """Exact cosine top-k, reranked by entity overlap and evidence density."""
    if len(index) == 0:
        return EvidenceBundle(tier=2, sufficiency=0.0)
    hits = index.search(question, k)
    reranked = []
    for entry, cosine in hits:
        score = (
            weights.cosine * cosine
            + weights.entity_overlap * entity_overlap(entry.text, intent)
            + weights.numeric_density * numeric_density(entry.text)
        )
        reranked.append((entry, max(0.0, score)))
    reranked.sort(key=lambda pair: (-pair[1], pair[0].chunk_id))
    items = [
        EvidenceItem(kind="chunk", payload={"chunk_id": e.chunk_id, "text": e.text}, score=s)
        for e, s in reranked
    ]
    top_score = items[0].score if items else 0.0
    sufficiency = top_score if top_score >= rules.min_grounding_score else 0.0
    return EvidenceBundle(tier=2, items=items, sufficiency=min(1.0, sufficiency) if items else 0.0)


def keyword_query(intent: ParsedIntent) -> str:
    """Order-stable join of entity names and relation-intent keywords."""
    words = [name for name, _ in intent.entities]
    words += [edge_type.value.lower().replace("_", " ") for edge_type in intent.relation_intents]
    return " ".join(words)


def tier3_open_domain(
    intent: ParsedIntent,
    client: OpenDomainClient | None,
    rules: EvaluationRules | None = None,
    limit: int = 3,
) -> EvidenceBundle:
    """Open-domain fallback; extracts are marked non-authoritative."""
    rules = rules or EvaluationRules()
    query = keyword_query(intent)
    if client is None:
        return EvidenceBundle(tier=3, sufficiency=0.0, fallback_status="exhausted")
    try:
        extracts = client.search(query, limit)
    except TransportError:
        return EvidenceBundle(tier=3, sufficiency=0.0, fallback_status="exhausted")
    items = [
        EvidenceItem(
            kind="open-domain-extract",
            payload={
                "title": extract.get("title", ""),
                "text": extract.get("text", ""),
                "authoritative": False,
            },
            score=0.5,
        )
        for extract in extracts
    ]
    sufficiency = min(1.0, len(items) / max(1, rules.min_evidence_items)) if items else 0.0
    return EvidenceBundle(tier=3, items=items, sufficiency=sufficiency, fallback_status="fell-back")


# ----------------------------------------------------------------------
# cascade + answer assembly
# ----------------------------------------------------------------------

EXHAUSTED_TEXT = "No evidence within the retrieval boundary; declining to answer."


def _describe_graph_item(item: EvidenceItem) -> list[str]:
    lines = []
    bindings = item.payload.get("bindings", {})
    nodes = [b for b in bindings.values() if b.get("kind") == "node"]
    paths = [b for b in bindings.values() if b.get("kind") == "path"]
    if paths:
        for path in paths:
            for edge in path["edges"]:
                src = next((n["name"] for n in nodes if n["id"] == edge["src"]), f"#{edge['src']}")
                dst = next((n["name"] for n in nodes if n["id"] == edge["dst"]), f"#{edge['dst']}")
                lines.append(f"- {src} -{edge['type']}-> {dst} (confidence {edge['confidence']:.2f})")
    else:
        names = ", ".join(sorted(n["name"] for n in nodes))
        lines.append(f"- {names}")
    chunk_ids = [e["chunk_id"] for e in item.payload.get("evidence", [])]
    if chunk_ids:
        lines.append(f"  sources: {', '.join(chunk_ids)}")
    return lines


def assemble_answer_text(question: str, bundle: EvidenceBundle, unresolved: list[str]) -> str:
    """Template answer over the evidence; pure and byte-stable."""
    if not bundle.items:
        return EXHAUSTED_TEXT
    if bundle.tier == 1:
        lines = [f"Graph evidence for {question!r} ({len(bundle.items)} fact(s)):"]
        seen: set[str] = set()
        for item in bundle.items:
            for line in _describe_graph_item(item):
                if line not in seen:
                    seen.add(line)
                    lines.append(line)
        return "\n".join(lines)
    if bundle.tier == 2:
        lines = [f"No sufficient graph facts for {question!r}; closest literature chunks:"]
        for item in bundle.items:
            lines.append(f"- [{item.payload['chunk_id']}] {item.payload['text']}")
        return "\n".join(lines)
    lines = [f"No local evidence for {question!r}; open-domain extracts (non-authoritative):"]
    for item in bundle.items:
        lines.append(f"- {item.payload['title']}: {item.payload['text']}")
    if unresolved:
        lines.append("Unresolved claims: " + "; ".join(unresolved))
    return "\n".join(lines)


def _unresolved_claims(intent: ParsedIntent, bundle: EvidenceBundle) -> list[str]:
    if intent.unparseable:
        return ["question could not be grounded in the domain ontology"]
    texts = " ".join(str(item.payload.get("text", "")) for item in bundle.items).lower()
    claims = []
    for name, _ in intent.entities:
        if name.lower() not in texts:
            claims.append(f"no evidence found for {name!r}")
    for edge_type in intent.relation_intents:
        keyword = edge_type.value.lower().replace("_", " ")
        if keyword not in texts:
            claims.append(f"no evidence found for relation {edge_type.value}")
    return claims


def route(
    question: str,
    graph: PropertyGraph,
    index: VectorIndex,
    clients: RouterClients | None = None,
    rules: EvaluationRules | None = None,
    *,
    lexicon: TriggerLexicon | None = None,
    mode: str = "deterministic",
    k: int = 5,
    weights: RerankWeights = RerankWeights(),
) -> Answer:
    """Strict cascade: graph, then local vectors, then open domain.

    Tier t backends are touched only after every earlier tier returned an
    insufficient bundle. Deterministic mode is a pure function of the inputs;
    generative mode delegates final wording to the completion client but
    keeps the same evidence trace.
    """
    if mode not in ("deterministic", "generative"):
        raise ValidationError(f"unknown mode {mode!r}")
    clients = clients or RouterClients()
    rules = rules or EvaluationRules()
    intent = parse_intent(question, graph, lexicon)

    bundle = tier1_graph(intent, graph, rules)
    if not bundle.sufficient:
        tier2 = tier2_vector(question, intent, index, rules, k=k, weights=weights)
        tier2.fallback_status = "fell-back"
        if tier2.sufficiency > 0.0:
            bundle = tier2
        else:
            bundle = tier3_open_domain(intent, clients.open_domain, rules)

    unresolved: list[str] = []
    if bundle.tier == 3:
        unresolved = _unresolved_claims(intent, bundle)

    text = assemble_answer_text(question, bundle, unresolved)
    if mode == "generative" and clients.completion is not None and bundle.items:
        context = "\n".join(str(item.payload) for item in bundle.items)
        text = clients.completion.complete(
            f"Answer the question strictly from the evidence below; cite chunk ids.\n"
            f"Question: {question}\nEvidence:\n{context}\nAnswer:"
        )
    return Answer(text=text, evidence=bundle, unresolved_claims=unresolved)
