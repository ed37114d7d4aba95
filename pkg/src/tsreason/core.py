"""Shared domain types, validation, and the canonical one-record-per-line codec."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Iterator, Sequence


class TaskKind(Enum):
    SCENARIO = "scenario_understanding"
    CAUSALITY = "causality_discovery"
    FORECAST = "event_aware_forecasting"
    DECISION = "decision_making"

    @property
    def is_discrete(self) -> bool:
        return self is not TaskKind.FORECAST

    @property
    def option_count(self) -> int | None:
        """Required number of options, or None for the sequence task."""
        return {TaskKind.SCENARIO: 4, TaskKind.CAUSALITY: 3, TaskKind.DECISION: 4}.get(self)


class Split(Enum):
    STAGE1_TRAIN = "stage1_train"
    STAGE2_TRAIN = "stage2_train"
    TEST_ID = "test_id"
    TEST_OOD = "test_ood"


TRAIN_SPLITS = (Split.STAGE1_TRAIN, Split.STAGE2_TRAIN)


@dataclass(frozen=True)
class TimeSeries:
    """A timestamped numeric sequence.

    ``start`` is UTC seconds since the epoch; ``step`` is the sampling
    interval in seconds. Values must all be finite.
    """

    values: tuple[float, ...]
    start: int
    step: int
    unit: str = ""
    domain: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def time_at(self, index: int) -> int:
        return self.start + index * self.step

    def index_of(self, time: int) -> int:
        """Index of the sample at exactly ``time``; raises if off-grid."""
        offset = time - self.start
        if offset % self.step != 0:
            raise ValueError(f"time {time} is not on the sampling grid")
        return offset // self.step

    def slice_window(self, start_time: int, n_points: int) -> "TimeSeries":
        i = self.index_of(start_time)
        if i < 0 or i + n_points > len(self.values):
            raise ValueError("window not covered by series")
        return replace(self, values=self.values[i : i + n_points], start=start_time)


@dataclass(frozen=True)
class EventRecord:
    time: int
    description: str


@dataclass(frozen=True)
class Choice:
    letter: str


@dataclass(frozen=True)
class SequenceAnswer:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


AnswerValue = Choice | SequenceAnswer


@dataclass(frozen=True)
class Sample:
    """One QA instance: the question context, its series, and the gold answer."""

    id: str
    task: TaskKind
    context: str
    series: tuple[TimeSeries, ...]
    events: tuple[EventRecord, ...] = ()
    options: tuple[tuple[str, str], ...] = ()
    horizon: int | None = None
    gold: AnswerValue = Choice("A")
    split: Split = Split.STAGE2_TRAIN
    cot: str | None = None

    def option_text(self, letter: str) -> str:
        for opt_letter, text in self.options:
            if opt_letter == letter:
                return text
        raise KeyError(letter)

    @property
    def option_letters(self) -> tuple[str, ...]:
        return tuple(letter for letter, _ in self.options)


def sample_id(task: TaskKind, context: str, series: Sequence[TimeSeries]) -> str:
    """Content-addressed id: stable hash of the question-defining fields."""
    payload = json.dumps(
        [task.value, context, [_series_record(s) for s in series]],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# -- validation ---------------------------------------------------------------


def _is_finite_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate_sample(sample: Sample) -> list[str]:
    """Check every domain invariant; returns a list of violations (empty = valid).

    Total: never raises, whatever the field contents.
    """
    violations: list[str] = []
    try:
        violations.extend(_validate_sample_inner(sample))
    except Exception as exc:  # malformed field types land here, not on the caller
        violations.append(f"unvalidatable sample: {exc}")
    return violations


def _validate_sample_inner(sample: Sample) -> Iterator[str]:
    if not isinstance(sample.id, str) or not sample.id:
        yield "id must be a non-empty string"
    if not isinstance(sample.task, TaskKind):
        yield "task must be a TaskKind"
        return

    if not sample.series:
        yield "at least one series required"
    for i, ts in enumerate(sample.series):
        if not isinstance(ts, TimeSeries):
            yield f"series[{i}] is not a TimeSeries"
            continue
        if len(ts.values) < 1:
            yield f"series[{i}] is empty"
        if not all(_is_finite_number(v) for v in ts.values):
            yield f"series[{i}] contains non-finite values"
        if not isinstance(ts.step, int) or ts.step <= 0:
            yield f"series[{i}] step must be a positive integer"
        if not isinstance(ts.start, int):
            yield f"series[{i}] start must be an integer timestamp"

    for i, ev in enumerate(sample.events):
        if not isinstance(ev, EventRecord) or not ev.description:
            yield f"events[{i}] description must be non-empty"
    if sample.events and sample.task in (TaskKind.SCENARIO, TaskKind.CAUSALITY):
        yield f"events are only allowed on forecasting/decision tasks, not {sample.task.value}"

    if sample.task.is_discrete:
        yield from _validate_discrete(sample)
    else:
        yield from _validate_sequence_task(sample)


def _validate_discrete(sample: Sample) -> Iterator[str]:
    if not sample.options:
        yield "discrete task requires options"
        return
    letters = [letter for letter, _ in sample.options]
    expected = [chr(ord("A") + i) for i in range(len(letters))]
    if letters != expected:
        yield f"option letters must run A..{expected[-1]}, got {letters}"
    k = sample.task.option_count
    if k is not None and len(sample.options) != k:
        yield f"K mismatch for {sample.task.name}: expected {k} options, got {len(sample.options)}"
    if sample.horizon is not None:
        yield "horizon is only valid on the forecasting task"
    if not isinstance(sample.gold, Choice):
        yield "discrete task gold must be a Choice"
    else:
        if not (len(sample.gold.letter) == 1 and "A" <= sample.gold.letter <= "Z"):
            yield f"gold letter {sample.gold.letter!r} is not an uppercase letter"
        elif sample.gold.letter not in letters:
            yield f"gold letter {sample.gold.letter} not among options"


def _validate_sequence_task(sample: Sample) -> Iterator[str]:
    if sample.options:
        yield "forecasting task takes no options"
    if not isinstance(sample.horizon, int) or sample.horizon < 1:
        yield "forecasting task requires a positive integer horizon"
        return
    if not isinstance(sample.gold, SequenceAnswer):
        yield "forecasting task gold must be a numeric sequence"
        return
    if len(sample.gold.values) != sample.horizon:
        yield f"gold length {len(sample.gold.values)} != horizon {sample.horizon}"
    if not all(_is_finite_number(v) for v in sample.gold.values):
        yield "gold sequence contains non-finite values"


def check_split_partition(samples: Iterable[Sample]) -> list[str]:
    """Dataset-level invariant: no sample id may appear under two splits."""
    seen: dict[str, Split] = {}
    violations: list[str] = []
    for s in samples:
        prev = seen.get(s.id)
        if prev is not None and prev is not s.split:
            violations.append(f"sample {s.id} appears under splits {prev.value} and {s.split.value}")
        seen.setdefault(s.id, s.split)
    return violations


# -- canonical record codec ---------------------------------------------------
#
# One sample per line, UTF-8 JSON with a fixed key order:
#   id, task, context, series, events, options, horizon, gold, split, cot
# Floats render as Python's shortest round-trip decimal, so encode/decode is
# exact. ``gold`` is a bare letter for discrete tasks, a list for sequences.


class RecordError(ValueError):
    """Malformed canonical record; carries the offending position/field."""


def _series_record(ts: TimeSeries) -> dict[str, Any]:
    return {
        "values": list(ts.values),
        "start": ts.start,
        "step": ts.step,
        "unit": ts.unit,
        "domain": ts.domain,
    }


def canonical_encode(sample: Sample) -> str:
    record = {
        "id": sample.id,
        "task": sample.task.value,
        "context": sample.context,
        "series": [_series_record(s) for s in sample.series],
        "events": [{"time": e.time, "description": e.description} for e in sample.events],
        "options": [[letter, text] for letter, text in sample.options],
        "horizon": sample.horizon,
        "gold": sample.gold.letter if isinstance(sample.gold, Choice) else list(sample.gold.values),
        "split": sample.split.value,
        "cot": sample.cot,
    }
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


_REQUIRED_KEYS = ("id", "task", "context", "series", "events", "options", "horizon", "gold", "split", "cot")


def canonical_decode(line: str) -> Sample:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"invalid JSON at position {exc.pos}: {exc.msg}") from exc
    if not isinstance(record, dict):
        raise RecordError("record is not an object")
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise RecordError(f"record missing field {key!r}")

    def fail(field_name: str, why: str) -> RecordError:
        return RecordError(f"field {field_name!r}: {why}")

    try:
        task = TaskKind(record["task"])
    except ValueError:
        raise fail("task", f"unknown task {record['task']!r}") from None
    try:
        split = Split(record["split"])
    except ValueError:
        raise fail("split", f"unknown split {record['split']!r}") from None

    series = []
    for i, sr in enumerate(record["series"]):
        try:
            series.append(
                TimeSeries(
                    values=tuple(sr["values"]),
                    start=sr["start"],
                    step=sr["step"],
                    unit=sr.get("unit", ""),
                    domain=sr.get("domain", ""),
                )
            )
        except (TypeError, KeyError) as exc:
            raise fail(f"series[{i}]", str(exc)) from None

    gold_raw = record["gold"]
    gold: AnswerValue
    if isinstance(gold_raw, str):
        gold = Choice(gold_raw)
    elif isinstance(gold_raw, list):
        gold = SequenceAnswer(tuple(gold_raw))
    else:
        raise fail("gold", "must be a letter or a list of numbers")

    try:
        return Sample(
            id=record["id"],
            task=task,
            context=record["context"],
            series=tuple(series),
            events=tuple(EventRecord(time=e["time"], description=e["description"]) for e in record["events"]),
            options=tuple((o[0], o[1]) for o in record["options"]),
            horizon=record["horizon"],
            gold=gold,
            split=split,
            cot=record["cot"],
        )
    except (TypeError, KeyError, IndexError) as exc:
        raise RecordError(f"malformed record: {exc}") from None


# -- dataset files ------------------------------------------------------------
#
# A dataset file is canonical records, one per line. Writers prepend a single
# reproducibility header line ``{"_meta": {...}}`` carrying the effective
# config; readers skip it.


def write_dataset(path: str, samples: Iterable[Sample], meta: dict[str, Any] | None = None) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, ensure_ascii=False, sort_keys=True) + "\n")
        for sample in samples:
            fh.write(canonical_encode(sample) + "\n")
            n += 1
    return n


def read_dataset(path: str) -> list[Sample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith('{"_meta"'):
                continue
            try:
                samples.append(canonical_decode(line))
            except RecordError as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from None
    return samples
