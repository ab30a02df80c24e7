"""Tolerant extraction of list-shaped model output and bracket helpers."""

from __future__ import annotations

import ast
import json
import re

from ..errors import MalformedResponse, ValidationError

_QUOTED = re.compile(r'"((?:[^"\\]|\\.)*)"|\'((?:[^\'\\]|\\.)*)\'')
_UNESCAPE = re.compile(r"\\(.)")
_BRACKET = re.compile(r"\[([^\[\]]*)\]")


def _first_balanced_block(text: str) -> str | None:
    """Return the first balanced ``[...]`` span, skipping brackets inside quotes."""
    start = text.find("[")
    while start != -1:
        depth = 0
        quote = None
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if quote:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == quote:
                    quote = None
                continue
            if ch in "\"'":
                # apostrophes inside words ("dog's") are not string delimiters
                if ch == "'" and i > 0 and text[i - 1].isalnum():
                    continue
                quote = ch
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        start = text.find("[", start + 1)
    return None


def extract_string_list(text: str) -> list[str]:
    """Parse a list of strings from a model reply.

    Accepts a strict JSON array, a Python-literal list, or, failing both, the
    quoted items of the first balanced ``[...]`` block.  Code fences and
    surrounding chatter are ignored.
    """
    if not isinstance(text, str):
        raise MalformedResponse("response content is not text")
    candidates = [text.strip()]
    block = _first_balanced_block(text)
    if block is not None:
        candidates.append(block)
    for cand in candidates:
        for loader in (json.loads, ast.literal_eval):
            try:
                value = loader(cand)
            except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
                continue
            if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
                return [str(v) for v in value]
    if block is not None:
        items = [_UNESCAPE.sub(r"\1", a or b) for a, b in _QUOTED.findall(block)]
        if items:
            return items
    raise MalformedResponse("could not find a list of strings in the response")


def bracketed_span(prompt: str) -> str | None:
    """The text inside the single ``[...]`` span of a prompt, or None.

    More than one span is rejected.
    """
    spans = _BRACKET.findall(prompt or "")
    if len(spans) > 1:
        raise ValidationError(f"prompt has {len(spans)} bracketed spans, at most one allowed: {prompt!r}")
    return spans[0].strip() if spans else None


def strip_reply(text: str, label: str | None = None) -> str:
    """Trim whitespace, an echoed field label and wrapping quotes."""
    out = text.strip()
    if label and out.lower().startswith(label.lower()):
        out = out[len(label):].lstrip(" :").strip()
    if len(out) >= 2 and out[0] == out[-1] and out[0] in "\"'":
        out = out[1:-1].strip()
    return out
