"""Prompt construction for evaluation and the annotation pipeline.

Two modes: rationale-first (think then answer) and answer-only. The tag
schema and the single-letter / comma-separated-number answer contracts are
load-bearing; the response parser and reward rules depend on them.
"""

from __future__ import annotations

from .core import Sample, TaskKind

MODE_COT = "cot"
MODE_ANS = "ans"

_ANSWER_CONTRACT = {
    TaskKind.SCENARIO: "a single uppercase option letter",
    TaskKind.CAUSALITY: "a single uppercase option letter",
    TaskKind.DECISION: "a single uppercase option letter",
    TaskKind.FORECAST: "the predicted values as comma-separated numbers, one per step",
}

SYSTEM_COT_TEMPLATE = (
    "You analyze time series and answer questions about them. First reason "
    "step by step inside <think> and </think> tags, then give only the final "
    "answer inside <answer> and </answer> tags. The answer must be {contract}."
)

SYSTEM_ANS_TEMPLATE = (
    "You analyze time series and answer questions about them. Reply with only "
    "the final answer inside <answer> and </answer> tags, with no explanation. "
    "The answer must be {contract}."
)


def system_prompt(task: TaskKind, mode: str = MODE_COT) -> str:
    contract = _ANSWER_CONTRACT[task]
    if mode == MODE_COT:
        return SYSTEM_COT_TEMPLATE.format(contract=contract)
    if mode == MODE_ANS:
        return SYSTEM_ANS_TEMPLATE.format(contract=contract)
    raise ValueError(f"unknown mode {mode!r}; expected {MODE_COT!r} or {MODE_ANS!r}")


def _render_series(sample: Sample) -> str:
    blocks = []
    label_many = len(sample.series) > 1
    for i, ts in enumerate(sample.series, start=1):
        name = f"Series {i}" if label_many else "Series"
        step_hours = ts.step / 3600
        head = f"{name} ({len(ts)} points, step {step_hours:g}h"
        if ts.unit:
            head += f", unit {ts.unit}"
        head += "):"
        values = ", ".join(f"{v:g}" for v in ts.values)
        blocks.append(f"{head}\n[{values}]")
    return "\n".join(blocks)


def _render_options(sample: Sample) -> str:
    return "\n".join(f"{letter}. {text}" for letter, text in sample.options)


def user_prompt(sample: Sample) -> str:
    parts = [sample.context, _render_series(sample)]
    if sample.options:
        parts.append("Options:\n" + _render_options(sample))
    if sample.task is TaskKind.FORECAST:
        parts.append(
            f"Output exactly {sample.horizon} comma-separated numbers inside the answer tags."
        )
    return "\n\n".join(parts)


def render_prompts(sample: Sample, mode: str = MODE_COT) -> tuple[str, str]:
    return system_prompt(sample.task, mode), user_prompt(sample)


# -- step-by-step guidance for the analyzer ------------------------------------

ANALYZER_TEMPLATES = {
    TaskKind.SCENARIO: (
        "Work through the options in order: (1) count the series points and "
        "keep options whose stated expected length matches the count; (2) "
        "compare the observed value range against each option's typical "
        "range; (3) check the stated repeating patterns against the series "
        "shape; (4) check whether described events show up as deviations; "
        "(5) eliminate options that failed a check; (6) re-verify the length "
        "of the remaining option before answering."
    ),
    TaskKind.CAUSALITY: (
        "Work in three steps: (1) compare the smoothed trends of the two "
        "series and check whether their rises and falls agree within a "
        "couple of steps; (2) locate the main peaks and dips and measure the "
        "shift between matching ones - shifts of three or more steps mean "
        "the pair is not causally linked; (3) if the shapes agree, the "
        "smaller-magnitude series is the upstream cause of the larger one."
    ),
    TaskKind.FORECAST: (
        "Work in three steps: (1) read the repeating daily pattern off the "
        "history and use the most recent unaffected day as the baseline; (2) "
        "if an event is scheduled in the forecast window, find a similar "
        "past event in the history and lift its extra-demand profile; (3) "
        "add that profile onto the baseline at the event hours and output "
        "one value per forecast step."
    ),
    TaskKind.DECISION: (
        "Work in three steps: (1) estimate the next day's load by mirroring "
        "the most recent 24 hours of the history; (2) discard options that "
        "charge during peak hours or discharge outside them; (3) for each "
        "remaining option, sum min(estimated load, max discharge rate) times "
        "the peak-valley price difference over its peak discharge hours, and "
        "pick the option with the highest total saving."
    ),
}

REWRITER_TEMPLATE = (
    "Rewrite the reasoning below into a clear, compact chain of thought. "
    "Keep every factual step and the final answer exactly as given. Output "
    "the polished reasoning inside <think> tags followed by the unchanged "
    "answer inside <answer> tags."
)

DRAFT_MARKER = "\n\nDraft reasoning:\n"


def analyzer_prompts(sample: Sample) -> tuple[str, str]:
    """System/user pair for the template-guided first solving pass."""
    system = system_prompt(sample.task, MODE_COT) + " " + ANALYZER_TEMPLATES[sample.task]
    return system, user_prompt(sample)


def rewriter_prompts(sample: Sample, draft: str) -> tuple[str, str]:
    """System/user pair for polishing a verified reasoning chain."""
    return REWRITER_TEMPLATE, user_prompt(sample) + DRAFT_MARKER + draft
