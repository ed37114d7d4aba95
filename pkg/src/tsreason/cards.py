"""Scenario cards and the option-text grammar for the scenario task.

The generator renders cards into option text; the template solver parses the
same text back. Round-tripping through render/parse is lossless for every
field except the domain tag, which is split bookkeeping and never shown.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import RecordError

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_CARD_RE = re.compile(
    rf"^(?P<desc>.*?)\s*Expected length: (?P<len>\d+) points; "
    rf"typical range: (?P<low>{_NUM}) to (?P<high>{_NUM}); "
    rf"patterns: (?P<patterns>[^;]*); "
    rf"events: (?P<events>[^.;]*)\.$",
    re.DOTALL,
)


@dataclass(frozen=True)
class ScenarioCard:
    description: str
    expected_length: int
    typical_range: tuple[float, float]
    pattern_tags: tuple[str, ...] = ()
    event_tags: tuple[str, ...] = ()
    domain_tag: str = ""

    def __post_init__(self) -> None:
        low, high = self.typical_range
        object.__setattr__(self, "typical_range", (float(low), float(high)))
        object.__setattr__(self, "pattern_tags", tuple(self.pattern_tags))
        object.__setattr__(self, "event_tags", tuple(self.event_tags))
        if self.expected_length < 1:
            raise ValueError("expected_length must be >= 1")
        if not low < high:
            raise ValueError("typical_range must satisfy low < high")

    def same_option_text(self, other: "ScenarioCard") -> bool:
        return render_card(self) == render_card(other)


def _tags(items: tuple[str, ...]) -> str:
    return ", ".join(items) if items else "none"


def _untags(text: str) -> tuple[str, ...]:
    text = text.strip()
    if text in ("", "none"):
        return ()
    return tuple(part.strip() for part in text.split(","))


def render_card(card: ScenarioCard) -> str:
    low, high = card.typical_range
    return (
        f"{card.description} "
        f"Expected length: {card.expected_length} points; "
        f"typical range: {low!r} to {high!r}; "
        f"patterns: {_tags(card.pattern_tags)}; "
        f"events: {_tags(card.event_tags)}."
    )


def parse_card(text: str) -> ScenarioCard:
    """Inverse of render_card; domain_tag comes back empty."""
    match = _CARD_RE.match(text.strip())
    if match is None:
        raise RecordError(f"option text does not follow the card grammar: {text!r}")
    return ScenarioCard(
        description=match.group("desc").strip(),
        expected_length=int(match.group("len")),
        typical_range=(float(match.group("low")), float(match.group("high"))),
        pattern_tags=_untags(match.group("patterns")),
        event_tags=_untags(match.group("events")),
    )
