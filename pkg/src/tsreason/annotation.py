"""Hierarchical annotation pipeline: analyzer solve, human review, rewriting,
curation, and stage exports.

Persistence is an append-only event log; the record table is a pure fold over
it, so replaying the log reconstructs state exactly and every transition is
audited. Human review is coordinated with leases so concurrent reviewers
never see the same sample.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Sequence

from .core import Choice, Sample, SequenceAnswer, TaskKind
from .gateway import TransportError
from .harness import Responder
from .parsing import parse_response
from .prompts import analyzer_prompts, rewriter_prompts
from .rewards import mae as mean_abs_error

DEFAULT_LEASE_SECONDS = 1800.0
DEFAULT_TASK3_BUDGET = 400


class Stage(Enum):
    PENDING = "pending"
    STEP1_SOLVED = "step1_solved"
    REVIEW_QUEUED = "review_queued"
    HUMAN_SOLVED = "human_solved"
    REWRITTEN = "rewritten"
    REJECTED = "rejected"
    TASK3_CURATED = "task3_curated"


ALLOWED_TRANSITIONS = frozenset(
    {
        (Stage.PENDING, Stage.STEP1_SOLVED),
        (Stage.PENDING, Stage.REVIEW_QUEUED),
        (Stage.PENDING, Stage.TASK3_CURATED),
        (Stage.REVIEW_QUEUED, Stage.HUMAN_SOLVED),
        (Stage.REVIEW_QUEUED, Stage.REJECTED),
        (Stage.HUMAN_SOLVED, Stage.REWRITTEN),
    }
)


class TransitionError(RuntimeError):
    """A persisted event tried to move a record against the pipeline order."""


class ConflictError(RuntimeError):
    """Concurrent review operations collided (double submit, stolen lease)."""


@dataclass(frozen=True)
class HumanVerdict:
    sufficient: bool
    reasoning: str
    reviewer_id: str


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    task: TaskKind
    order: int
    stage: Stage = Stage.PENDING
    analyzer_output: str = ""
    analyzer_correct: bool = False
    human_verdict: HumanVerdict | None = None
    polished_cot: str | None = None
    mae: float | None = None
    error_note: str | None = None
    drift_flag: bool = False
    lease: tuple[str, float] | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "task": self.task.value,
            "stage": self.stage.value,
            "analyzer_correct": self.analyzer_correct,
            "mae": self.mae,
            "drift_flag": self.drift_flag,
            "error_note": self.error_note,
            "human_verdict": (
                {
                    "sufficient": self.human_verdict.sufficient,
                    "reasoning": self.human_verdict.reasoning,
                    "reviewer_id": self.human_verdict.reviewer_id,
                }
                if self.human_verdict
                else None
            ),
        }


def _move(record: AnnotationRecord, new_stage: Stage) -> AnnotationRecord:
    if (record.stage, new_stage) not in ALLOWED_TRANSITIONS:
        raise TransitionError(
            f"illegal transition {record.stage.value} -> {new_stage.value} "
            f"for sample {record.sample_id}"
        )
    return replace(record, stage=new_stage)


def apply_event(records: dict[str, AnnotationRecord], event: dict[str, Any]) -> None:
    """Fold one event into the record table; pure state logic for both live
    appends and log replay."""
    kind = event["type"]
    sid = event["sample_id"]
    if kind == "registered":
        if sid in records:
            raise TransitionError(f"sample {sid} registered twice")
        records[sid] = AnnotationRecord(
            sample_id=sid, task=TaskKind(event["task"]), order=event["seq"]
        )
        return

    record = records.get(sid)
    if record is None:
        raise TransitionError(f"event for unregistered sample {sid}")

    if kind == "analyzed":
        if event.get("error"):
            records[sid] = replace(record, error_note=event["error"])
            return
        record = replace(
            record,
            analyzer_output=event["output"],
            analyzer_correct=bool(event["correct"]),
            mae=event.get("mae"),
            error_note=None,
        )
        if event["correct"]:
            record = _move(record, Stage.STEP1_SOLVED)
        elif record.task.is_discrete:
            record = _move(record, Stage.REVIEW_QUEUED)
        # sequence samples with a finite error wait for curation instead
        records[sid] = record
    elif kind == "leased":
        if record.stage is not Stage.REVIEW_QUEUED:
            raise TransitionError(f"cannot lease sample {sid} in stage {record.stage.value}")
        records[sid] = replace(record, lease=(event["reviewer"], float(event["at"])))
    elif kind == "reviewed":
        verdict = HumanVerdict(
            sufficient=bool(event["sufficient"]),
            reasoning=event["reasoning"],
            reviewer_id=event["reviewer"],
        )
        target = Stage.HUMAN_SOLVED if verdict.sufficient else Stage.REJECTED
        records[sid] = replace(_move(record, target), human_verdict=verdict, lease=None)
    elif kind == "rewritten":
        if event["preserved"]:
            records[sid] = replace(
                _move(record, Stage.REWRITTEN), polished_cot=event["cot"], drift_flag=False
            )
        else:
            if record.stage is not Stage.HUMAN_SOLVED:
                raise TransitionError(f"cannot rewrite sample {sid} in stage {record.stage.value}")
            records[sid] = replace(record, drift_flag=True)
    elif kind == "curated":
        records[sid] = _move(record, Stage.TASK3_CURATED)
    else:
        raise TransitionError(f"unknown event type {kind!r}")


def fold_events(events: Iterable[dict[str, Any]]) -> dict[str, AnnotationRecord]:
    records: dict[str, AnnotationRecord] = {}
    for event in events:
        apply_event(records, event)
    return records


class AnnotationStore:
    """Append-only event log with a derived in-memory record table.

    With a path, every event is flushed as one JSON line and the log is
    reloaded on construction; without one the store is memory-only.
    """

    def __init__(self, path: str | None = None):
        self._path = path
        self._events: list[dict[str, Any]] = []
        self._records: dict[str, AnnotationRecord] = {}
        self._lock = threading.RLock()
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._events.append(json.loads(line))
            self._records = fold_events(self._events)

    def append(self, event: dict[str, Any]) -> AnnotationRecord:
        with self._lock:
            event = dict(event)
            event["seq"] = len(self._events)
            apply_event(self._records, event)  # raises before anything persists
            self._events.append(event)
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            return self._records[event["sample_id"]]

    @property
    def events(self) -> tuple[dict[str, Any], ...]:
        with self._lock:
            return tuple(self._events)

    def records(self) -> dict[str, AnnotationRecord]:
        with self._lock:
            return dict(self._records)

    def get(self, sample_id: str) -> AnnotationRecord | None:
        with self._lock:
            return self._records.get(sample_id)

    def stage_counts(self) -> dict[str, int]:
        with self._lock:
            counts = {stage.value: 0 for stage in Stage}
            for record in self._records.values():
                counts[record.stage.value] += 1
            return counts

    def lock(self) -> threading.RLock:
        return self._lock


def register_samples(store: AnnotationStore, samples: Sequence[Sample], now: float = 0.0) -> int:
    added = 0
    for sample in samples:
        if store.get(sample.id) is None:
            store.append(
                {"type": "registered", "sample_id": sample.id, "task": sample.task.value, "at": now}
            )
            added += 1
    return added


# -- pipeline passes ------------------------------------------------------------


def _grade(sample: Sample, raw: str) -> tuple[bool, float | None]:
    """Correctness plus, for sequences, the absolute error when defined."""
    allowed = set(sample.option_letters) if sample.options else None
    parsed = parse_response(raw, sample.task, allowed)
    if parsed.extracted is None:
        return False, None
    if isinstance(sample.gold, Choice):
        return (
            isinstance(parsed.extracted, Choice)
            and parsed.extracted.letter == sample.gold.letter,
            None,
        )
    assert isinstance(sample.gold, SequenceAnswer)
    if not isinstance(parsed.extracted, SequenceAnswer):
        return False, None
    if len(parsed.extracted.values) != len(sample.gold.values):
        return False, None
    err = mean_abs_error(parsed.extracted.values, sample.gold.values)
    return err == 0.0, err


def analyzer_pass(
    store: AnnotationStore, sample: Sample, responder: Responder, now: float = 0.0
) -> AnnotationRecord:
    """Template-guided first solve: correct answers close the sample, wrong
    discrete answers join the human queue, scored sequences await curation."""
    record = store.get(sample.id)
    if record is None:
        raise ValueError(f"sample {sample.id} not registered")
    if record.stage is not Stage.PENDING:
        return record
    system, user = analyzer_prompts(sample)
    try:
        raw = responder.respond(system, user)
    except TransportError as exc:
        return store.append(
            {"type": "analyzed", "sample_id": sample.id, "error": str(exc), "at": now}
        )
    correct, err = _grade(sample, raw)
    return store.append(
        {
            "type": "analyzed",
            "sample_id": sample.id,
            "output": raw,
            "correct": correct,
            "mae": err,
            "error": None,
            "at": now,
        }
    )


def lease_active(record: AnnotationRecord, now: float, lease_seconds: float) -> bool:
    return record.lease is not None and now - record.lease[1] < lease_seconds


def next_review(
    store: AnnotationStore,
    reviewer_id: str,
    now: float,
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
) -> AnnotationRecord | None:
    """Lease the oldest queued sample not actively leased to someone else."""
    if not reviewer_id:
        raise ValueError("reviewer id required")
    with store.lock():
        queued = sorted(
            (r for r in store.records().values() if r.stage is Stage.REVIEW_QUEUED),
            key=lambda r: r.order,
        )
        for record in queued:
            held_by_other = (
                lease_active(record, now, lease_seconds) and record.lease[0] != reviewer_id
            )
            if held_by_other:
                continue
            return store.append(
                {"type": "leased", "sample_id": record.sample_id, "reviewer": reviewer_id, "at": now}
            )
    return None


def submit_review(
    store: AnnotationStore,
    sample_id: str,
    verdict: HumanVerdict,
    now: float,
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
) -> AnnotationRecord:
    """Sufficient context (with reasoning) solves the sample; insufficient
    context rejects it from every future export."""
    if verdict.sufficient and not verdict.reasoning.strip():
        raise ValueError("a sufficient verdict requires non-empty reasoning")
    with store.lock():
        record = store.get(sample_id)
        if record is None:
            raise KeyError(sample_id)
        if record.stage is not Stage.REVIEW_QUEUED:
            raise ConflictError(f"sample {sample_id} already resolved ({record.stage.value})")
        if record.lease is None or record.lease[0] != verdict.reviewer_id:
            raise ConflictError(f"sample {sample_id} is not leased to {verdict.reviewer_id}")
        if not lease_active(record, now, lease_seconds):
            raise ConflictError(f"lease on sample {sample_id} expired")
        return store.append(
            {
                "type": "reviewed",
                "sample_id": sample_id,
                "reviewer": verdict.reviewer_id,
                "sufficient": verdict.sufficient,
                "reasoning": verdict.reasoning,
                "at": now,
            }
        )


def rewriter_pass(
    store: AnnotationStore, sample: Sample, responder: Responder, now: float = 0.0
) -> AnnotationRecord:
    """Polish a human-solved sample; the rewrite must still parse to gold."""
    record = store.get(sample.id)
    if record is None or record.stage is not Stage.HUMAN_SOLVED:
        raise ValueError(f"sample {sample.id} is not human-solved")
    assert record.human_verdict is not None
    draft = record.human_verdict.reasoning
    system, user = rewriter_prompts(sample, draft)
    try:
        raw = responder.respond(system, user)
    except TransportError:
        return record
    preserved, _ = _grade(sample, raw)
    return store.append(
        {
            "type": "rewritten",
            "sample_id": sample.id,
            "cot": raw if preserved else None,
            "preserved": preserved,
            "at": now,
        }
    )


def curate_task3(
    store: AnnotationStore,
    budget: int = DEFAULT_TASK3_BUDGET,
    now: float = 0.0,
) -> tuple[list[str], bool]:
    """Promote the budget-many lowest-error pending forecast samples; returns
    (selected ids, whether the pool was smaller than the budget)."""
    with store.lock():
        candidates = [
            r
            for r in store.records().values()
            if r.task is TaskKind.FORECAST
            and r.stage is Stage.PENDING
            and r.mae is not None
        ]
        candidates.sort(key=lambda r: (r.mae, r.sample_id))
        selected = candidates[: max(0, budget)]
        for record in selected:
            store.append({"type": "curated", "sample_id": record.sample_id, "at": now})
        return [r.sample_id for r in selected], len(candidates) < budget


STAGE1_STAGES = frozenset({Stage.STEP1_SOLVED, Stage.REWRITTEN, Stage.TASK3_CURATED})


def export_stage(
    store: AnnotationStore, dataset: Sequence[Sample], stage_name: str
) -> list[Sample]:
    """stage1: reasoning-bearing samples (cot populated); stage2: label-only
    samples. Rejected records appear in neither.

    Curated forecasts train on the analyzer's own near-miss sequence, so
    their exported label is that sequence; every exported cot then re-grades
    to its record's gold.
    """
    records = store.records()
    out = []
    for sample in dataset:
        record = records.get(sample.id)
        if record is None or record.stage is Stage.REJECTED:
            continue
        if stage_name == "stage1":
            if record.stage not in STAGE1_STAGES:
                continue
            cot = record.polished_cot if record.stage is Stage.REWRITTEN else record.analyzer_output
            exported = replace(sample, cot=cot)
            if record.stage is Stage.TASK3_CURATED:
                parsed = parse_response(cot, sample.task)
                if not isinstance(parsed.extracted, SequenceAnswer):
                    continue
                exported = replace(exported, gold=parsed.extracted)
            out.append(exported)
        elif stage_name == "stage2":
            out.append(replace(sample, cot=None))
        else:
            raise ValueError(f"unknown export stage {stage_name!r}")
    return out


def run_analyzer_stage(
    store: AnnotationStore, dataset: Sequence[Sample], responder: Responder, now: float = 0.0
) -> dict[str, int]:
    register_samples(store, dataset, now)
    moved = {"step1_solved": 0, "review_queued": 0, "pending": 0}
    for sample in dataset:
        record = store.get(sample.id)
        if record is None or record.stage is not Stage.PENDING:
            continue
        record = analyzer_pass(store, sample, responder, now)
        key = record.stage.value if record.stage.value in moved else "pending"
        moved[key] += 1
    return moved


def run_rewriter_stage(
    store: AnnotationStore, dataset: Sequence[Sample], responder: Responder, now: float = 0.0
) -> dict[str, int]:
    moved = {"rewritten": 0, "drifted": 0}
    for sample in dataset:
        record = store.get(sample.id)
        if record is None or record.stage is not Stage.HUMAN_SOLVED:
            continue
        record = rewriter_pass(store, sample, responder, now)
        moved["rewritten" if record.stage is Stage.REWRITTEN else "drifted"] += 1
    return moved
