"""Dictionary-based entity normalization.

Maps textual aliases to canonical forms ("RTO" -> "regenerative thermal
oxidizer") with case-insensitive, whitespace-trimmed lookup. Lookup is total:
unmapped names pass through trimmed but otherwise untouched.
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError


class NormalizationDictionary:
    """Alias -> canonical mapping with chain-free validation."""

    def __init__(self, mapping: dict[str, str] | None = None):
        self._map: dict[str, str] = {}
        for alias, canonical in (mapping or {}).items():
            self.add(alias, canonical)

    def add(self, alias: str, canonical: str) -> None:
        alias_key = alias.strip().casefold()
        canonical = canonical.strip()
        if not alias_key or not canonical:
            raise ValidationError("alias and canonical must be non-empty")
        existing = self._map.get(canonical.casefold())
        if existing is not None and existing != canonical:
            raise ValidationError(
                f"canonical {canonical!r} is itself an alias of {existing!r} (chain)"
            )
        for other_alias, other_canonical in self._map.items():
            if other_alias == alias_key and other_canonical != canonical:
                raise ValidationError(f"alias {alias!r} already maps to {other_canonical!r}")
        # Adding alias→canonical must not turn an existing canonical into an alias.
        for other_canonical in self._map.values():
            if other_canonical.casefold() == alias_key and other_canonical != canonical:
                raise ValidationError(
                    f"{alias!r} is the canonical form of another entry (chain)"
                )
        self._map[alias_key] = canonical

    def canonical(self, name: str) -> str:
        """Trimmed, case-folded lookup; identity on misses."""
        trimmed = name.strip()
        return self._map.get(trimmed.casefold(), trimmed)

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, name: str) -> bool:
        return name.strip().casefold() in self._map

    def items(self):
        return self._map.items()

    @classmethod
    def empty(cls) -> "NormalizationDictionary":
        return cls({})

    @classmethod
    def load(cls, path: str | Path) -> "NormalizationDictionary":
        """Load from a JSON object file or a two-column TSV (alias<TAB>canonical)."""
        text = Path(path).read_text(encoding="utf-8")
        stripped = text.lstrip()
        if stripped.startswith("{"):
            mapping = json.loads(text)
            if not isinstance(mapping, dict):
                raise ValidationError("normalization JSON must be an object")
            return cls({str(k): str(v) for k, v in mapping.items()})
        dictionary = cls()
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"normalization TSV line {line_no}: expected 2 columns")
            dictionary.add(parts[0], parts[1])
        return dictionary


def normalize_name(name: str, dictionary: NormalizationDictionary | None = None) -> str:
    """Canonical form of a raw entity name; pure."""
    if dictionary is None:
        return name.strip()
    return dictionary.canonical(name)
