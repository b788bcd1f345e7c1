"""Resume-safe document-to-record extraction pipeline.

Documents are windowed into chunks, each chunk is pushed through a completion
client with exponential-backoff retries, replies are validated against the
record schema (with one repair pass for truncated JSON), and finished chunk
ids are checkpointed so a crashed run resumes without re-extracting or
duplicating anything. Chunks that exhaust their retries land in a failures
ledger and the run continues.

The dual-track relation rules live here too: explicit relations fire only on
trigger patterns between two mentions inside one sentence (track 1), and
constrained co-occurrence relations connect otherwise-isolated mentions
(track 2, confidence-capped).
"""
from __future__ import annotations

import json
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .chunking import ChunkingConfig, chunk_document, chunk_identifier
from .clients import CHUNK_BEGIN, CHUNK_END, DEFAULT_TEMPERATURE, CompletionClient
from .errors import RepairError, TransportError, ValidationError
from .graph import EdgeType, NodeLabel
from .jsonrepair import repair_json
from .lexicon import CoOccurrenceRules, Mention, TriggerLexicon
from .records import ChunkRecord, RelationSpec

TRACK1_CONFIDENCE = 0.9  # repo convention: rule-triggered explicit relations
TRACK2_CONFIDENCE = 0.4  # repo convention: heuristic co-occurrence relations


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3  # total attempts per chunk
    base_delay: float = 0.5
    multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.base_delay < 0:
            raise ValidationError("base_delay must be >= 0")
        if self.multiplier <= 1.0:
            raise ValidationError("multiplier must be > 1")

    def delay(self, attempt: int) -> float:
        return self.base_delay * self.multiplier**attempt


class Checkpoint:
    """Append-only processed-chunk ledger, one chunk id per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.processed: set[str] = set()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    self.processed.add(line)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self.processed

    def add(self, chunk_id: str) -> None:
        if chunk_id in self.processed:
            return
        self.processed.add(chunk_id)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(chunk_id + "\n")
            handle.flush()


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction text with a ``{chunk}`` placeholder; rendering is pure."""

    template: str

    def render(self, chunk_text: str) -> str:
        return self.template.replace("{chunk}", chunk_text)

    @classmethod
    def load(cls, path: str | Path) -> "PromptTemplate":
        return cls(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "PromptTemplate":
        labels = ", ".join(l.value for l in NodeLabel if l is not NodeLabel.CHUNK)
        types = ", ".join(t.value for t in EdgeType if t is not EdgeType.MENTIONS)
        return cls(
            "Extract entities and relations from the literature excerpt below.\n"
            f"Entity categories: {labels}.\n"
            f"Relation types: {types}.\n"
            "Reply with a single JSON object: {\"entities\": {category: [{\"name\", "
            "\"evidence_span\", \"evidence_text\"}]}, \"relations\": [{\"head\", \"head_type\", "
            "\"tail\", \"tail_type\", \"type\", \"evidence_text\", \"confidence\"}]}.\n"
            "Only report relations the text states or clearly implies; attach the supporting "
            "sentence as evidence_text and a confidence in [0,1].\n"
            f"{CHUNK_BEGIN}\n{{chunk}}\n{CHUNK_END}\n"
        )


# ----------------------------------------------------------------------
# Dual-track relation rules
# ----------------------------------------------------------------------


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    start = 0
    for match in re.finditer(r"[.!?](?:\s+|$)", text):
        spans.append((start, match.end()))
        start = match.end()
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def _paragraph_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for match in re.finditer(r"\n\s*\n", text):
        spans.append((start, match.start()))
        start = match.end()
    spans.append((start, len(text)))
    return spans


def dual_track_extract(
    text: str,
    lexicon: TriggerLexicon,
    rules: CoOccurrenceRules | None = None,
) -> tuple[list[RelationSpec], list[RelationSpec]]:
    """Explicit trigger-fired relations plus constrained co-occurrence fill-in.

    Track 1 emits a relation only when a trigger pattern for the edge type
    occurs between two mentions within one sentence; evidence_text is that
    sentence. Track 2 adds CO_OCCURS_IN between pairs sharing a scope when
    either member has no explicit relation, capped in count and confidence.
    """
    rules = rules or CoOccurrenceRules(confidence=TRACK2_CONFIDENCE)
    mentions = lexicon.find_entities(text)

    explicit: list[RelationSpec] = []
    seen: set[tuple[str, str, str]] = set()
    for s_start, s_end in _sentence_spans(text):
        sentence = text[s_start:s_end].strip()
        inside = [m for m in mentions if m.start >= s_start and m.end <= s_end]
        for i, head in enumerate(inside):
            for tail in inside[i + 1 :]:
                if head.name == tail.name:
                    continue
                gap = text[head.end : tail.start]
                for edge_type, patterns in lexicon.triggers.items():
                    if edge_type is EdgeType.MENTIONS:
                        continue
                    if not any(re.search(p, gap, re.IGNORECASE) for p in patterns):
                        continue
                    key = (head.name, edge_type.value, tail.name)
                    if key in seen:
                        continue
                    seen.add(key)
                    explicit.append(
                        RelationSpec(
                            head=head.name,
                            head_type=head.category,
                            tail=tail.name,
                            tail_type=tail.category,
                            type=edge_type.value,
                            evidence_text=sentence,
                            confidence=TRACK1_CONFIDENCE,
                        )
                    )

    implicit: list[RelationSpec] = []
    if rules.enabled and rules.max_pairs_per_chunk > 0:
        connected = {rel.head for rel in explicit} | {rel.tail for rel in explicit}
        if rules.scope == "sentence":
            scopes = _sentence_spans(text)
        elif rules.scope == "paragraph":
            scopes = _paragraph_spans(text)
        else:
            scopes = [(0, len(text))]
        paired: set[frozenset[str]] = set()
        for scope_start, scope_end in scopes:
            inside = [m for m in mentions if m.start >= scope_start and m.end <= scope_end]
            firsts: list[Mention] = []
            names_seen: set[str] = set()
            for mention in inside:
                if mention.name not in names_seen:
                    names_seen.add(mention.name)
                    firsts.append(mention)
            for i, head in enumerate(firsts):
                for tail in firsts[i + 1 :]:
                    if head.name in connected and tail.name in connected:
                        continue
                    pair = frozenset((head.name, tail.name))
                    if pair in paired:
                        continue
                    if len(implicit) >= rules.max_pairs_per_chunk:
                        break
                    paired.add(pair)
                    implicit.append(
                        RelationSpec(
                            head=head.name,
                            head_type=head.category,
                            tail=tail.name,
                            tail_type=tail.category,
                            type=EdgeType.CO_OCCURS_IN.value,
                            evidence_text=None,
                            confidence=min(rules.confidence, 0.5),
                        )
                    )
    return explicit, implicit


def entities_payload(text: str, lexicon: TriggerLexicon) -> dict[str, list[dict]]:
    """Entity lists (with spans and sentence evidence) for a chunk reply."""
    sentences = _sentence_spans(text)
    payload: dict[str, list[dict]] = {}
    emitted: set[tuple[str, str]] = set()
    for mention in lexicon.find_entities(text):
        if (mention.category, mention.name) in emitted:
            continue
        emitted.add((mention.category, mention.name))
        sentence = next(
            (text[a:b].strip() for a, b in sentences if mention.start >= a and mention.end <= b),
            None,
        )
        payload.setdefault(mention.category, []).append(
            {
                "name": mention.name,
                "evidence_span": [mention.start, mention.end],
                "evidence_text": sentence,
            }
        )
    return payload


# ----------------------------------------------------------------------
# Extraction run
# ----------------------------------------------------------------------


@dataclass
class ChunkFailure:
    chunk_id: str
    attempts: int
    last_error: str

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "attempts": self.attempts, "last_error": self.last_error}


@dataclass
class ExtractionReport:
    chunks_total: int = 0
    chunks_skipped: int = 0
    chunks_extracted: int = 0
    chunks_failed: int = 0
    client_calls: int = 0
    failures: list[ChunkFailure] = field(default_factory=list)
    delays: dict[str, list[float]] = field(default_factory=dict)
    attempts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "chunks_total": self.chunks_total,
            "chunks_skipped": self.chunks_skipped,
            "chunks_extracted": self.chunks_extracted,
            "chunks_failed": self.chunks_failed,
            "client_calls": self.client_calls,
            "failures": [f.to_dict() for f in self.failures],
        }


def _compose_record(reply: str, chunk_id: str, doc_id: str, text: str) -> ChunkRecord:
    """Parse a model reply (repairing once if truncated) into a full record."""
    try:
        body = json.loads(reply)
    except json.JSONDecodeError:
        body = json.loads(repair_json(reply))  # RepairError propagates as failure
    if not isinstance(body, dict):
        raise ValidationError("reply is not a JSON object")
    return ChunkRecord.from_dict(
        {
            "chunk_id": chunk_id,
            "doc_id": doc_id,
            "text": text,
            "entities": body.get("entities") or {},
            "relations": body.get("relations") or [],
        }
    )


def _compact_output(out_path: Path) -> set[str]:
    """Dedup an existing output file by chunk_id; return the ids present."""
    if not out_path.exists():
        return set()
    kept: list[str] = []
    ids: set[str] = set()
    for line in out_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            chunk_id = json.loads(line).get("chunk_id")
        except json.JSONDecodeError:
            continue
        if chunk_id and chunk_id not in ids:
            ids.add(chunk_id)
            kept.append(line)
    out_path.write_text("".join(k + "\n" for k in kept), encoding="utf-8")
    return ids


def run_extraction(
    docs: Sequence[tuple[str, str]],
    template: PromptTemplate,
    client: CompletionClient,
    retry: RetryPolicy,
    checkpoint: Checkpoint,
    chunking: ChunkingConfig | None = None,
    *,
    out_path: str | Path,
    failures_path: str | Path | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
    sleep: Callable[[float], None] = time.sleep,
    workers: int = 1,
) -> ExtractionReport:
    """Extract every unprocessed chunk of every document into JSONL output.

    Output-then-checkpoint ordering makes writes at-least-once; a dedup pass
    on startup restores exactly-once output after a crash.
    """
    chunking = chunking or ChunkingConfig()
    out_path = Path(out_path)
    report = ExtractionReport()
    write_lock = threading.Lock()

    emitted = _compact_output(out_path)
    for chunk_id in emitted:  # output implies processed even if checkpoint append was lost
        checkpoint.add(chunk_id)

    tasks: list[tuple[str, str, str]] = []  # (chunk_id, doc_id, chunk_text)
    for doc_id, text in docs:
        for index, chunk_text in chunk_document(doc_id, text, chunking):
            report.chunks_total += 1
            chunk_id = chunk_identifier(doc_id, index)
            if chunk_id in checkpoint:
                report.chunks_skipped += 1
                continue
            tasks.append((chunk_id, doc_id, chunk_text))

    failures_handle = open(failures_path, "a", encoding="utf-8") if failures_path else None
    out_handle = open(out_path, "a", encoding="utf-8")

    def extract_one(task: tuple[str, str, str]) -> None:
        chunk_id, doc_id, chunk_text = task
        prompt = template.render(chunk_text)
        last_error = "no attempts made"
        delays: list[float] = []
        attempt = 0
        while attempt < retry.max_retries:
            try:
                with write_lock:
                    report.client_calls += 1
                reply = client.complete(prompt, temperature)
                record = _compose_record(reply, chunk_id, doc_id, chunk_text)
            except (TransportError, RepairError, ValidationError, json.JSONDecodeError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                attempt += 1
                if attempt < retry.max_retries:
                    pause = retry.delay(attempt - 1)
                    delays.append(pause)
                    sleep(pause)
                continue
            attempt += 1
            with write_lock:
                out_handle.write(record.to_json() + "\n")
                out_handle.flush()
                checkpoint.add(chunk_id)
                report.chunks_extracted += 1
                report.attempts[chunk_id] = attempt
                report.delays[chunk_id] = delays
            return
        failure = ChunkFailure(chunk_id, attempt, last_error)
        with write_lock:
            report.chunks_failed += 1
            report.attempts[chunk_id] = attempt
            report.delays[chunk_id] = delays
            report.failures.append(failure)
            if failures_handle:
                failures_handle.write(json.dumps(failure.to_dict(), ensure_ascii=False) + "\n")
                failures_handle.flush()

    try:
        if workers <= 1:
            for task in tasks:
                extract_one(task)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(extract_one, tasks))
    finally:
        out_handle.close()
        if failures_handle:
            failures_handle.close()
    return report


def load_documents(directory: str | Path, suffix: str = ".txt") -> list[tuple[str, str]]:
    """Read plain-text documents from a directory, sorted by filename."""
    docs = []
    for path in sorted(Path(directory).glob(f"*{suffix}")):
        docs.append((path.stem, path.read_text(encoding="utf-8")))
    return docs
