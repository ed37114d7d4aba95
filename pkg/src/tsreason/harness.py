"""Run responders over datasets and aggregate success-rate and score reports.

A responder is anything that maps (system prompt, user prompt) to raw text.
Every evaluation first stores per-sample raw responses, then scores them, so
scoring can be re-run offline without re-querying anything.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Protocol, Sequence

import numpy as np

from . import oracles
from .core import Choice, Sample, SequenceAnswer, Split, TaskKind, sample_id
from .gateway import ChatClient, TransportError
from .parsing import parse_response
from .prompts import DRAFT_MARKER, MODE_ANS, MODE_COT, render_prompts, user_prompt
from .rewards import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    RewardBreakdown,
    RolloutGroup,
    mae,
    score_response,
)

Z95 = 1.96


class Responder(Protocol):
    name: str

    def respond(self, system: str, user: str) -> str: ...


# -- responder implementations --------------------------------------------------


@dataclass
class ScriptedResponder:
    """Always returns the same text; useful for degenerate-case checks."""

    text: str
    name: str = "scripted"

    def respond(self, system: str, user: str) -> str:
        return self.text


class ReplayResponder:
    """Replays stored raw responses, keyed by the exact user prompt."""

    def __init__(self, responses: dict[str, str], name: str = "replay"):
        self._responses = dict(responses)
        self.name = name

    @classmethod
    def from_records(
        cls, dataset: Sequence[Sample], records: Sequence["ResponseRecord"]
    ) -> "ReplayResponder":
        by_id = {r.sample_id: r.raw for r in records}
        mapping = {user_prompt(s): by_id[s.id] for s in dataset if s.id in by_id}
        return cls(mapping)

    def respond(self, system: str, user: str) -> str:
        try:
            return self._responses[user]
        except KeyError:
            raise TransportError("no stored response for this prompt") from None


class GoldResponder:
    """Answers every sample perfectly, wrapped in the expected schema."""

    name = "gold"

    def __init__(self, dataset: Sequence[Sample]):
        self._responses = {user_prompt(s): self._render(s) for s in dataset}

    @staticmethod
    def _render(sample: Sample) -> str:
        if isinstance(sample.gold, Choice):
            answer = sample.gold.letter
        else:
            answer = ", ".join(repr(v) for v in sample.gold.values)
        return f"<think>verified reference answer.</think><answer>{answer}</answer>"

    def respond(self, system: str, user: str) -> str:
        try:
            return self._responses[user]
        except KeyError:
            raise TransportError("prompt does not belong to this dataset") from None


class GoldRewriter:
    """Gold responder for rewrite prompts, which append a draft after the
    original user prompt; the lookup resolves through that prefix."""

    name = "gold-rewriter"

    def __init__(self, dataset: Sequence[Sample]):
        self._gold = GoldResponder(dataset)

    def respond(self, system: str, user: str) -> str:
        return self._gold.respond(system, user.split(DRAFT_MARKER, 1)[0])


class DraftRewriter:
    """Deterministic rewrite responder that keeps the reviewer's draft: the
    draft text becomes the think block, the reference answer fills the answer
    block, so the polished record preserves the human reasoning verbatim."""

    name = "draft-rewriter"

    def __init__(self, dataset: Sequence[Sample]):
        self._samples = {user_prompt(s): s for s in dataset}

    def respond(self, system: str, user: str) -> str:
        prefix, marker, draft = user.partition(DRAFT_MARKER)
        sample = self._samples.get(prefix)
        if sample is None or not marker or not draft.strip():
            raise TransportError("not a rewrite prompt for this dataset")
        if isinstance(sample.gold, Choice):
            answer = sample.gold.letter
        else:
            answer = ", ".join(repr(v) for v in sample.gold.values)
        return f"<think>{draft.strip()}</think><answer>{answer}</answer>"


class OracleResponder:
    """Runs the template solvers; prompt-keyed lookup into the dataset."""

    def __init__(self, dataset: Sequence[Sample], name: str = "oracle"):
        self._samples = {user_prompt(s): s for s in dataset}
        self.name = name

    def respond(self, system: str, user: str) -> str:
        sample = self._samples.get(user)
        if sample is None:
            raise TransportError("prompt does not belong to this dataset")
        try:
            return oracles.solve(sample).render()
        except Exception as exc:
            return f"<think>template failed: {exc}</think><answer>none</answer>"


class RandomResponder:
    """Uniform guesses; per-call draws derive from (seed, prompt, call count),
    so repeated calls on one prompt differ while full runs stay reproducible."""

    def __init__(self, seed: int = 0, name: str = "random"):
        self._seed = seed
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()
        self.name = name

    def respond(self, system: str, user: str) -> str:
        with self._lock:
            count = self._counts.get(user, 0)
            self._counts[user] = count + 1
        digest = hashlib.sha256(f"{self._seed}:{count}:{user}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        letters = [
            line[0]
            for line in user.splitlines()
            if len(line) > 2 and line[1:3] == ". " and "A" <= line[0] <= "Z"
        ]
        if letters:
            pick = letters[int(rng.integers(0, len(letters)))]
            return f"<think>guessing.</think><answer>{pick}</answer>"
        values = ", ".join("0" for _ in range(24))
        return f"<think>guessing.</think><answer>{values}</answer>"


@dataclass
class GatewayResponder:
    """Live model behind a chat-completions endpoint."""

    client: ChatClient
    mode: str = MODE_COT
    temperature: float = 0.0
    max_tokens: int = 1024

    @property
    def name(self) -> str:
        return f"gateway:{self.client.model}"

    def respond(self, system: str, user: str) -> str:
        return self.client.complete(
            system, user, temperature=self.temperature, max_tokens=self.max_tokens
        )


# -- per-sample scoring ----------------------------------------------------------


@dataclass(frozen=True)
class ResponseRecord:
    sample_id: str
    task: TaskKind
    split: Split
    raw: str
    valid: bool
    correct: bool | None
    abs_error: float | None
    reward_format: int
    reward_task: float
    reward_total: float
    error: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "task": self.task.value,
            "split": self.split.value,
            "raw": self.raw,
            "valid": self.valid,
            "correct": self.correct,
            "abs_error": self.abs_error,
            "reward_format": self.reward_format,
            "reward_task": self.reward_task,
            "reward_total": self.reward_total,
            "error": self.error,
        }


def score_sample(
    sample: Sample,
    raw: str,
    lambda_: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
    error: str | None = None,
) -> ResponseRecord:
    """Parse + grade one raw response; validity gates every metric."""
    allowed = set(sample.option_letters) if sample.options else None
    parsed = parse_response(raw, sample.task, allowed)
    breakdown = score_response(parsed, sample.gold, lambda_, alpha)

    valid = parsed.extractable
    correct: bool | None = None
    abs_error: float | None = None
    if sample.task.is_discrete:
        if valid:
            assert isinstance(parsed.extracted, Choice)
            assert isinstance(sample.gold, Choice)
            correct = parsed.extracted.letter == sample.gold.letter
    else:
        if valid:
            assert isinstance(parsed.extracted, SequenceAnswer)
            assert isinstance(sample.gold, SequenceAnswer)
            if len(parsed.extracted.values) == len(sample.gold.values):
                abs_error = mae(parsed.extracted.values, sample.gold.values)
            else:
                valid = False  # a sequence of the wrong length has no defined error
    return ResponseRecord(
        sample_id=sample.id,
        task=sample.task,
        split=sample.split,
        raw=raw,
        valid=valid,
        correct=correct,
        abs_error=abs_error,
        reward_format=breakdown.format,
        reward_task=breakdown.task,
        reward_total=breakdown.total,
        error=error,
    )


# -- aggregation -------------------------------------------------------------------


@dataclass(frozen=True)
class CellStats:
    task: TaskKind
    split: Split
    n_total: int
    n_valid: int
    sr: float
    metric_name: str
    metric: float | None
    ci_half: float | None

    @property
    def displayable(self) -> bool:
        """Table rule: cells under 10% success rate are not reported."""
        return self.sr >= 10.0 and self.metric is not None


@dataclass(frozen=True)
class EvalReport:
    cells: tuple[CellStats, ...]
    config: dict[str, Any]

    def cell(self, task: TaskKind, split: Split) -> CellStats | None:
        for c in self.cells:
            if c.task is task and c.split is split:
                return c
        return None

    def render_text(self) -> str:
        header = f"{'task':<26} {'split':<14} {'n':>6} {'valid':>6} {'SR%':>7} {'metric':>10} {'value':>10} {'CI95':>8}"
        lines = [header, "-" * len(header)]
        for c in self.cells:
            value = f"{c.metric:.3f}" if c.displayable else "--"
            ci = f"±{c.ci_half:.3f}" if c.displayable and c.ci_half is not None else ""
            lines.append(
                f"{c.task.value:<26} {c.split.value:<14} {c.n_total:>6} {c.n_valid:>6} "
                f"{c.sr:>7.1f} {c.metric_name:>10} {value:>10} {ci:>8}"
            )
        lines.append("")
        lines.append("config: " + json.dumps(self.config, sort_keys=True))
        return "\n".join(lines)

    def to_record(self) -> dict[str, Any]:
        return {
            "cells": [
                {
                    "task": c.task.value,
                    "split": c.split.value,
                    "n_total": c.n_total,
                    "n_valid": c.n_valid,
                    "sr": c.sr,
                    "metric_name": c.metric_name,
                    "metric": c.metric if c.displayable else None,
                    "ci_half": c.ci_half if c.displayable else None,
                }
                for c in self.cells
            ],
            "config": self.config,
        }


@dataclass(frozen=True)
class EvalResult:
    records: tuple[ResponseRecord, ...]
    report: EvalReport


def _bootstrap_ci(errors: Sequence[float], resamples: int = 1000) -> float:
    if len(errors) < 2:
        return 0.0
    rng = np.random.default_rng([97, len(errors)])
    arr = np.asarray(errors, dtype=float)
    means = np.sort(
        np.mean(arr[rng.integers(0, len(arr), size=(resamples, len(arr)))], axis=1)
    )
    lo, hi = means[int(0.025 * resamples)], means[int(0.975 * resamples) - 1]
    return float((hi - lo) / 2.0)


def aggregate(records: Sequence[ResponseRecord], config: dict[str, Any]) -> EvalReport:
    """Deterministic per-(task, split) roll-up; metrics only over valid rows."""
    ordered = sorted(records, key=lambda r: (r.task.value, r.split.value, r.sample_id))
    cells = []
    keys = sorted(
        {(r.task, r.split) for r in ordered}, key=lambda k: (k[0].value, k[1].value)
    )
    for task, split in keys:
        rows = [r for r in ordered if r.task is task and r.split is split]
        valid = [r for r in rows if r.valid]
        assert len(rows) == len(valid) + sum(1 for r in rows if not r.valid)
        sr = 100.0 * len(valid) / len(rows)
        if task.is_discrete:
            metric_name = "ACC%"
            if valid:
                p = sum(1 for r in valid if r.correct) / len(valid)
                metric = 100.0 * p
                ci = Z95 * (p * (1 - p) / len(valid)) ** 0.5 * 100.0
            else:
                metric, ci = None, None
        else:
            metric_name = "MAE"
            errors = [r.abs_error for r in valid if r.abs_error is not None]
            if errors:
                metric = float(np.mean(errors))
                ci = _bootstrap_ci(errors)
            else:
                metric, ci = None, None
        cells.append(
            CellStats(
                task=task,
                split=split,
                n_total=len(rows),
                n_valid=len(valid),
                sr=sr,
                metric_name=metric_name,
                metric=metric,
                ci_half=ci,
            )
        )
    return EvalReport(cells=tuple(cells), config=config)


# -- evaluation loop ----------------------------------------------------------------


def _ask(
    responder: Responder, system: str, user: str, max_retries: int
) -> tuple[str, str | None]:
    last = ""
    for attempt in range(max_retries + 1):
        try:
            return responder.respond(system, user), None
        except TransportError as exc:
            last = str(exc)
    return "", f"transport: {last}"


def run_eval(
    dataset: Sequence[Sample],
    responder: Responder,
    mode: str = MODE_COT,
    concurrency: int = 8,
    max_retries: int = 2,
    lambda_: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
    extra_config: dict[str, Any] | None = None,
) -> EvalResult:
    if not dataset:
        raise ValueError("dataset is empty")
    if mode not in (MODE_COT, MODE_ANS):
        raise ValueError(f"unknown mode {mode!r}")

    def one(sample: Sample) -> ResponseRecord:
        system, user = render_prompts(sample, mode)
        raw, error = _ask(responder, system, user, max_retries)
        return score_sample(sample, raw, lambda_, alpha, error=error)

    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(one, dataset))
    else:
        records = [one(s) for s in dataset]
    records.sort(key=lambda r: (r.task.value, r.split.value, r.sample_id))

    config = {
        "responder": responder.name,
        "mode": mode,
        "lambda": lambda_,
        "alpha": alpha,
        "n_samples": len(dataset),
    }
    if extra_config:
        config.update(extra_config)
    return EvalResult(records=tuple(records), report=aggregate(records, config))


# -- context sufficiency probe --------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    sample_id: str
    task: TaskKind
    n: int
    correct: int
    k: int
    flagged: bool


def sufficiency_probe(
    dataset: Sequence[Sample],
    strong_responder: Responder,
    resamples: int = 6,
    z: float = Z95,
    mode: str = MODE_COT,
) -> list[ProbeResult]:
    """Flag discrete items whose accuracy over repeated attempts sits inside
    the 1/K guessing band: such items cannot be answered from their context."""
    if resamples < 5:
        raise ValueError("resamples must be >= 5")
    results = []
    for sample in dataset:
        if not sample.task.is_discrete:
            continue
        k = len(sample.options)
        system, user = render_prompts(sample, mode)
        correct = 0
        for _ in range(resamples):
            try:
                raw = strong_responder.respond(system, user)
            except TransportError:
                continue
            record = score_sample(sample, raw)
            if record.correct:
                correct += 1
        band = z * (resamples * (1.0 / k) * (1.0 - 1.0 / k)) ** 0.5
        flagged = abs(correct - resamples / k) <= band
        results.append(
            ProbeResult(
                sample_id=sample.id,
                task=sample.task,
                n=resamples,
                correct=correct,
                k=k,
                flagged=flagged,
            )
        )
    return results


def strip_context(sample: Sample) -> Sample:
    """Remove the information each task needs, leaving a well-formed sample.

    Scenario options lose their measurable metadata, causality series go
    flat, and decision contexts lose the battery description. Ids are
    recomputed since the question content changed.
    """
    if sample.task is TaskKind.SCENARIO:
        stripped = replace(
            sample,
            options=tuple(
                (letter, text.split(" Expected length:")[0])
                for letter, text in sample.options
            ),
        )
    elif sample.task is TaskKind.CAUSALITY:
        flat = tuple(
            replace(ts, values=(1.0,) * len(ts.values)) for ts in sample.series
        )
        stripped = replace(sample, series=flat)
    elif sample.task is TaskKind.DECISION:
        stripped = replace(
            sample,
            context="Pick the best battery plan for the next 24 hours.",
        )
    else:
        return sample
    return replace(
        stripped, id=sample_id(stripped.task, stripped.context, stripped.series)
    )


# -- reasoning-gap audit ----------------------------------------------------------------


@dataclass(frozen=True)
class TaskGap:
    task: TaskKind
    metric_name: str
    delta: float | None
    ci_half: float | None


def principle_gap(report_cot: EvalReport, report_ans: EvalReport) -> list[TaskGap]:
    """Per-task score difference, rationale mode minus answer-only mode.

    MAE deltas are sign-flipped so a positive delta always favors the
    rationale mode.
    """
    keys_cot = {(c.task, c.split) for c in report_cot.cells}
    keys_ans = {(c.task, c.split) for c in report_ans.cells}
    if keys_cot != keys_ans:
        raise ValueError("reports cover different task/split cells")

    gaps = []
    for task in sorted({t for t, _ in keys_cot}, key=lambda t: t.value):
        pair_stats = []
        for which, report in (("cot", report_cot), ("ans", report_ans)):
            cells = [c for c in report.cells if c.task is task and c.n_valid > 0 and c.metric is not None]
            n = sum(c.n_valid for c in cells)
            if n == 0:
                pair_stats.append(None)
                continue
            metric = sum(c.metric * c.n_valid for c in cells) / n
            ci = sum((c.ci_half or 0.0) * c.n_valid for c in cells) / n
            pair_stats.append((metric, ci))
        metric_name = "ACC%" if task.is_discrete else "MAE"
        if None in pair_stats:
            gaps.append(TaskGap(task, metric_name, None, None))
            continue
        (m_cot, ci_cot), (m_ans, ci_ans) = pair_stats
        delta = (m_cot - m_ans) if task.is_discrete else (m_ans - m_cot)
        gaps.append(TaskGap(task, metric_name, delta, ci_cot + ci_ans))
    return gaps


# -- rollout collection --------------------------------------------------------------------


@dataclass(frozen=True)
class RolloutRecord:
    sample_id: str
    responses: tuple[str, ...]
    breakdowns: tuple[RewardBreakdown, ...]
    group: RolloutGroup
    transport_failures: int

    @property
    def usable(self) -> bool:
        """Groups need at least two members to carry advantage information."""
        return len(self.group.rewards) >= 2


def collect_rollouts(
    dataset: Sequence[Sample],
    responder: Responder,
    group_size: int = 8,
    lambda_: float = DEFAULT_LAMBDA,
    alpha: float = DEFAULT_ALPHA,
) -> list[RolloutRecord]:
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    out = []
    for sample in dataset:
        system, user = render_prompts(sample, MODE_COT)
        responses: list[str] = []
        failures = 0
        for _ in range(group_size):
            try:
                responses.append(responder.respond(system, user))
            except TransportError:
                failures += 1
        allowed = set(sample.option_letters) if sample.options else None
        breakdowns = tuple(
            score_response(parse_response(raw, sample.task, allowed), sample.gold, lambda_, alpha)
            for raw in responses
        )
        if not responses:
            continue
        out.append(
            RolloutRecord(
                sample_id=sample.id,
                responses=tuple(responses),
                breakdowns=breakdowns,
                group=RolloutGroup(
                    rewards=tuple(b.total for b in breakdowns), group_id=sample.id
                ),
                transport_failures=failures,
            )
        )
    return out
