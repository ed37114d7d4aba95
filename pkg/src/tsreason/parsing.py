"""Decompose raw model text into think/answer spans and recover a scorable answer.

The output schema is byte-exact lowercase ``<think>...</think><answer>...</answer>``.
Parsing is total: malformed input surfaces as flags, never as an exception.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from .core import AnswerValue, Choice, SequenceAnswer, TaskKind

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"


@dataclass(frozen=True)
class ParsedResponse:
    raw: str
    think: str | None
    answer_raw: str | None
    extracted: AnswerValue | None
    schema_ok: bool
    extractable: bool


def _single_span(text: str, open_tag: str, close_tag: str) -> str | None:
    """Content between open/close tags iff each occurs exactly once, in order."""
    if text.count(open_tag) != 1 or text.count(close_tag) != 1:
        return None
    start = text.index(open_tag)
    end = text.index(close_tag)
    if end < start:
        return None
    return text[start + len(open_tag) : end]


def parse_response(raw: str, task: TaskKind, allowed: set[str] | None = None) -> ParsedResponse:
    """Parse a raw response for the given task.

    ``schema_ok`` requires exactly one think block followed by exactly one
    answer block; text outside the blocks is tolerated. ``allowed`` narrows
    choice extraction to the sample's option letters (default A-Z).
    """
    think = _single_span(raw, THINK_OPEN, THINK_CLOSE)
    answer_raw = _single_span(raw, ANSWER_OPEN, ANSWER_CLOSE)

    schema_ok = (
        think is not None
        and answer_raw is not None
        and raw.index(THINK_CLOSE) <= raw.index(ANSWER_OPEN)
    )

    extracted: AnswerValue | None = None
    if answer_raw is not None:
        if task.is_discrete:
            letter = extract_choice(answer_raw, allowed or set(string.ascii_uppercase))
            if letter is not None:
                extracted = Choice(letter)
        else:
            values = extract_sequence(answer_raw)
            if values is not None:
                extracted = SequenceAnswer(tuple(values))

    return ParsedResponse(
        raw=raw,
        think=think,
        answer_raw=answer_raw,
        extracted=extracted,
        schema_ok=bool(schema_ok),
        extractable=extracted is not None,
    )


_STRIP_CHARS = string.whitespace + string.punctuation


def extract_choice(answer_raw: str, allowed: set[str]) -> str | None:
    """The chosen letter, iff exactly one allowed uppercase letter remains
    after removing whitespace and punctuation. Case-sensitive by contract.
    """
    if not allowed:
        raise ValueError("allowed letter set must be non-empty")
    stripped = "".join(c for c in answer_raw if c not in _STRIP_CHARS)
    if len(stripped) == 1 and stripped in allowed:
        return stripped
    return None


_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def extract_sequence(answer_raw: str) -> list[float] | None:
    """Parse an optionally bracket-wrapped, comma/whitespace-separated list
    of decimal numbers. Any non-numeric token makes the whole parse fail.
    """
    text = answer_raw.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    tokens = [t for t in re.split(r"[\s,]+", text) if t]
    if not tokens:
        return None
    values = []
    for token in tokens:
        if not _NUMBER_RE.match(token):
            return None
        values.append(float(token))
    return values
