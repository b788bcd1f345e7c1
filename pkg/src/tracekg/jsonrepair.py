"""Heuristic repair of truncated JSON lines.

Model-generated JSONL frequently arrives cut off mid-object. The repair rule
is deliberately narrow: scan the text with a string-aware bracket stack and
append only the closing quotes/brackets/braces that the unmatched opens imply.
If the text is not a strict prefix of valid JSON (mismatched close, truncated
literal, trailing comma, ...) the line is rejected rather than rewritten, so
repaired output always extends the original prefix verbatim.
"""
from __future__ import annotations

import json

from .errors import RepairError

_CLOSER = {"{": "}", "[": "]"}
_OPENER = {"}": "{", "]": "["}


def repair_json(text: str) -> str:
    """Return `text` completed to valid JSON, or raise :class:`RepairError`.

    Already-valid JSON is returned unchanged. The repaired string always has
    `text` as a literal prefix; only closing quotes/brackets are appended.
    """
    try:
        json.loads(text)
        return text
    except json.JSONDecodeError:
        pass

    stack: list[str] = []
    in_string = False
    escaped = False
    for position, char in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue
        if char == '"':
            in_string = True
        elif char in _CLOSER:
            stack.append(char)
        elif char in _OPENER:
            if not stack or stack[-1] != _OPENER[char]:
                raise RepairError(f"mismatched {char!r}", position=position)
            stack.pop()

    suffix = ""
    if in_string:
        suffix += '"'
    suffix += "".join(_CLOSER[opener] for opener in reversed(stack))
    if not suffix:
        raise RepairError("invalid JSON with no unclosed scopes", position=len(text))

    candidate = text + suffix
    try:
        json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise RepairError(
            f"prefix is not completable by closers: {exc.msg}",
            position=min(exc.pos, len(text)),
        ) from None
    return candidate
