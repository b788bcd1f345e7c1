"""Pluggable text-completion and open-domain search backends.

Two families of client sit behind small call contracts: completion clients
(prompt in, text out) and open-domain search clients (keyword query in,
extracts out). Each has an HTTP implementation configured by endpoint/model
and a deterministic offline implementation used by tests and the default
`mock` backend mode. API keys are read from environment variables only.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import httpx

from .errors import TransportError
from .lexicon import CoOccurrenceRules, TriggerLexicon

DEFAULT_TEMPERATURE = 0.2  # benchmark-protocol default

CHUNK_BEGIN = "<<<CHUNK>>>"
CHUNK_END = "<<<END CHUNK>>>"


class CompletionClient(Protocol):
    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE) -> str:
        """Return the model reply for a prompt; raise TransportError on failure."""
        ...


class OpenDomainClient(Protocol):
    def search(self, query: str, limit: int = 3) -> list[dict[str, str]]:
        """Return extracts [{'title', 'text'}]; raise TransportError on failure."""
        ...


# ----------------------------------------------------------------------
# HTTP backends
# ----------------------------------------------------------------------


@dataclass
class HttpCompletionClient:
    """Generic chat-completion endpoint (POST, OpenAI-style payload)."""

    endpoint: str
    model: str
    api_key_env: str = "TRACEKG_API_KEY"
    timeout: float = 60.0

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE) -> str:
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        try:
            response = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"completion backend failed: {exc}") from exc


@dataclass
class HttpOpenDomainClient:
    """Encyclopedia-style search endpoint behind a response adapter."""

    endpoint: str
    timeout: float = 30.0
    adapter: Callable[[Any], list[dict[str, str]]] | None = None

    def search(self, query: str, limit: int = 3) -> list[dict[str, str]]:
        try:
            response = httpx.get(self.endpoint, params={"q": query, "limit": limit}, timeout=self.timeout)
            response.raise_for_status()
            data = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise TransportError(f"open-domain backend failed: {exc}") from exc
        adapter = self.adapter or default_search_adapter
        return adapter(data)[:limit]


def default_search_adapter(data: Any) -> list[dict[str, str]]:
    """Accepts either our native {'extracts': [...]} shape or MediaWiki search JSON."""
    if isinstance(data, dict):
        if isinstance(data.get("extracts"), list):
            return [
                {"title": str(item.get("title", "")), "text": str(item.get("text", ""))}
                for item in data["extracts"]
            ]
        hits = data.get("query", {}).get("search")
        if isinstance(hits, list):
            return [
                {"title": str(hit.get("title", "")), "text": re.sub(r"<[^>]+>", "", str(hit.get("snippet", "")))}
                for hit in hits
            ]
    raise TransportError("open-domain response shape not recognized")


# ----------------------------------------------------------------------
# Deterministic offline backends
# ----------------------------------------------------------------------


@dataclass
class RuleBasedCompletionClient:
    """Mock extractor: applies the dual-track rules to the chunk in the prompt.

    Replies with the entities/relations JSON body the extraction pipeline
    expects. Deterministic; temperature is accepted and ignored.
    """

    lexicon: TriggerLexicon
    rules: CoOccurrenceRules = field(default_factory=CoOccurrenceRules)
    calls: int = 0

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE) -> str:
        self.calls += 1
        chunk = _chunk_from_prompt(prompt)
        from .extract import dual_track_extract, entities_payload  # local import: extract imports clients

        explicit, implicit = dual_track_extract(chunk, self.lexicon, self.rules)
        body = {
            "entities": entities_payload(chunk, self.lexicon),
            "relations": [rel.to_dict() for rel in explicit + implicit],
        }
        return json.dumps(body, ensure_ascii=False)


def _chunk_from_prompt(prompt: str) -> str:
    start = prompt.find(CHUNK_BEGIN)
    end = prompt.find(CHUNK_END)
    if start == -1 or end == -1 or end <= start:
        raise TransportError("prompt carries no delimited chunk")
    return prompt[start + len(CHUNK_BEGIN) : end].strip("\n")


class ScriptedCompletionClient:
    """Test double replaying a fixed script of replies and failures."""

    def __init__(self, script: list[str | Exception], cycle_last: bool = False):
        self.script = list(script)
        self.cycle_last = cycle_last
        self.calls: list[str] = []

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE) -> str:
        self.calls.append(prompt)
        if not self.script:
            raise TransportError("script exhausted")
        item = self.script[0] if self.cycle_last and len(self.script) == 1 else self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class FixtureOpenDomainClient:
    """Offline open-domain search backed by canned extracts.

    ``fixtures`` maps a lower-cased keyword to its extracts; a query matches a
    key when the key occurs in the query. ``fail=True`` simulates a dead
    backend.
    """

    def __init__(self, fixtures: dict[str, list[dict[str, str]]] | None = None, fail: bool = False):
        self.fixtures = {k.lower(): v for k, v in (fixtures or {}).items()}
        self.fail = fail
        self.calls: list[str] = []

    def search(self, query: str, limit: int = 3) -> list[dict[str, str]]:
        self.calls.append(query)
        if self.fail:
            raise TransportError("open-domain backend unreachable")
        lowered = query.lower()
        extracts: list[dict[str, str]] = []
        for key in sorted(self.fixtures):
            if key in lowered:
                extracts.extend(self.fixtures[key])
        return extracts[:limit]
