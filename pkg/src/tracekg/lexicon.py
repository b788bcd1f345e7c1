"""Trigger lexicon and co-occurrence rule configuration.

The lexicon drives every deterministic text-understanding path in the repo:
the rule-based mock extractor, the dual-track relation rules, and question
intent parsing. It maps surface entity names to ontology categories and edge
types to the trigger patterns that license an explicit relation.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .graph import EdgeType, NodeLabel


@dataclass(frozen=True)
class CoOccurrenceRules:
    """Constraints on heuristic co-occurrence edges (track 2)."""

    enabled: bool = True
    scope: str = "chunk"  # sentence | paragraph | chunk
    max_pairs_per_chunk: int = 10
    confidence: float = 0.4

    def __post_init__(self) -> None:
        if self.scope not in ("sentence", "paragraph", "chunk"):
            raise ValidationError(f"unknown co-occurrence scope: {self.scope!r}")
        if self.max_pairs_per_chunk < 0:
            raise ValidationError("max_pairs_per_chunk must be >= 0")
        if not 0.0 <= self.confidence <= 0.5:
            raise ValidationError("co-occurrence confidence must lie in [0, 0.5]")

    @classmethod
    def from_dict(cls, obj: dict) -> "CoOccurrenceRules":
        return cls(
            enabled=bool(obj.get("enabled", True)),
            scope=str(obj.get("scope", "chunk")),
            max_pairs_per_chunk=int(obj.get("max_pairs_per_chunk", 10)),
            confidence=float(obj.get("confidence", 0.4)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "CoOccurrenceRules":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Mention:
    """One lexicon hit inside a text."""

    name: str  # lexicon surface form
    category: str
    start: int
    end: int


@dataclass
class TriggerLexicon:
    """Known entity surface forms plus relation trigger patterns."""

    entities: dict[str, str] = field(default_factory=dict)  # surface -> category
    triggers: dict[EdgeType, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for surface, category in self.entities.items():
            label = NodeLabel.parse(category)
            if label is NodeLabel.CHUNK:
                raise ValidationError(f"lexicon entity {surface!r} may not be a Chunk")

    def find_entities(self, text: str) -> list[Mention]:
        """All non-overlapping lexicon hits, longest surface form first."""
        hits: list[Mention] = []
        taken: list[tuple[int, int]] = []
        for surface in sorted(self.entities, key=len, reverse=True):
            pattern = re.compile(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", re.IGNORECASE)
            for match in pattern.finditer(text):
                span = (match.start(), match.end())
                if any(s < span[1] and span[0] < e for s, e in taken):
                    continue
                taken.append(span)
                hits.append(Mention(surface, self.entities[surface], span[0], span[1]))
        hits.sort(key=lambda m: (m.start, m.end))
        return hits

    def intent_types(self, text: str) -> list[EdgeType]:
        """Edge types whose trigger patterns occur anywhere in the text."""
        lowered = text.lower()
        found = []
        for edge_type in EdgeType:
            for pattern in self.triggers.get(edge_type, ()):
                if re.search(pattern, lowered, re.IGNORECASE):
                    found.append(edge_type)
                    break
        return found

    @classmethod
    def from_dict(cls, obj: dict) -> "TriggerLexicon":
        triggers: dict[EdgeType, list[str]] = {}
        for type_name, patterns in (obj.get("triggers") or {}).items():
            triggers[EdgeType.parse(type_name)] = [str(p) for p in patterns]
        return cls(entities=dict(obj.get("entities") or {}), triggers=triggers)

    @classmethod
    def load(cls, path: str | Path) -> "TriggerLexicon":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# Default trigger patterns per edge type; shipped as config, overridable per run.
DEFAULT_TRIGGERS: dict[EdgeType, list[str]] = {
    EdgeType.EMITS: [r"\bemits?\b", r"\bemitted\b", r"\breleases?\b"],
    EdgeType.CONTROLLED_BY: [r"\bcontrolled by\b", r"\babated (?:by|with)\b", r"\btreated (?:by|with)\b"],
    EdgeType.MEASURED_BY: [r"\bmeasured (?:by|with|using)\b", r"\bdetected (?:by|with)\b", r"\bhow is .* measured\b"],
    EdgeType.PARTICIPATES_IN: [r"\bparticipates? in\b", r"\binvolved in\b"],
    EdgeType.INFLUENCED_BY: [r"\binfluenced by\b", r"\bdepends on\b", r"\baffected by\b"],
    EdgeType.BELONGS_TO: [r"\bbelongs? to\b", r"\bis an?\b.*\bclass\b"],
    EdgeType.REGULATED_BY: [r"\bregulated (?:by|under)\b", r"\blimit(?:ed)? (?:by|under)\b"],
    EdgeType.OCCURS_UNDER: [r"\boccurs? (?:under|during)\b", r"\bduring\b"],
    EdgeType.CORRELATES_WITH: [r"\bcorrelates? with\b", r"\bassociated with\b"],
    EdgeType.MEASURES: [r"\bmeasures\b", r"\bquantifies\b"],
}


def default_lexicon(entities: dict[str, str] | None = None) -> TriggerLexicon:
    return TriggerLexicon(entities=dict(entities or {}), triggers={k: list(v) for k, v in DEFAULT_TRIGGERS.items()})
