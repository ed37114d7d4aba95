"""QA sample builders for the four tasks plus split assignment."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..battery import (
    BatterySpec,
    PriceSchedule,
    Strategy,
    rank_options,
    render_decision_context,
    render_strategy,
)
from ..cards import ScenarioCard, render_card
from ..core import (
    Choice,
    EventRecord,
    Sample,
    SequenceAnswer,
    Split,
    TaskKind,
    TimeSeries,
    sample_id,
)
from .corpus import GenConfig, RiverGraph

SCENARIO_CONTEXT = (
    "A monitoring system logged the series shown below. "
    "Decide which scenario description matches the recording."
)

CAUSALITY_OPTIONS = (
    ("A", "Series 1 causes Series 2."),
    ("B", "Series 1 and Series 2 are not causally related."),
    ("C", "Series 2 causes Series 1."),
)


def _range_overlap_fraction(true_range: tuple[float, float], other: tuple[float, float]) -> float:
    """Overlap length relative to the true range's span."""
    lo = max(true_range[0], other[0])
    hi = min(true_range[1], other[1])
    span = true_range[1] - true_range[0]
    return max(0.0, hi - lo) / span


def gen_scenario_qa(
    true_card: ScenarioCard,
    series: TimeSeries,
    distractor_pool: Sequence[ScenarioCard],
    rng: np.random.Generator,
    *,
    split: Split = Split.STAGE2_TRAIN,
    length_tolerance: float = 0.02,
) -> Sample:
    """Four shuffled options: the true card plus three distractors, of which
    at least one differs in expected length, one in typical range, and one in
    pattern/event tags."""
    if len(series) != true_card.expected_length:
        raise ValueError(
            f"series length {len(series)} != card expected length {true_card.expected_length}"
        )
    if len(distractor_pool) < 3:
        raise ValueError("distractor pool must hold at least 3 cards")

    true_text = render_card(true_card)
    pool = [c for c in distractor_pool if render_card(c) != true_text]
    tol = length_tolerance * true_card.expected_length
    len_bucket = [c for c in pool if abs(c.expected_length - true_card.expected_length) > tol]
    range_bucket = [
        c for c in pool if _range_overlap_fraction(true_card.typical_range, c.typical_range) < 0.5
    ]
    tag_bucket = [
        c
        for c in pool
        if set(c.pattern_tags) != set(true_card.pattern_tags)
        or set(c.event_tags) != set(true_card.event_tags)
    ]
    triples = [
        (a, b, c)
        for a in len_bucket
        for b in range_bucket
        for c in tag_bucket
        if len({render_card(a), render_card(b), render_card(c)}) == 3
    ]
    if not triples:
        raise ValueError("pool cannot satisfy the distractor distinctness constraints")
    distractors = triples[int(rng.integers(0, len(triples)))]

    cards = [true_card, *distractors]
    order = rng.permutation(4)
    options = []
    gold_letter = ""
    for pos, card_idx in enumerate(order):
        letter = chr(ord("A") + pos)
        options.append((letter, render_card(cards[card_idx])))
        if card_idx == 0:
            gold_letter = letter

    return Sample(
        id=sample_id(TaskKind.SCENARIO, SCENARIO_CONTEXT, [series]),
        task=TaskKind.SCENARIO,
        context=SCENARIO_CONTEXT,
        series=(series,),
        options=tuple(options),
        gold=Choice(gold_letter),
        split=split,
    )


def gen_causality_qa(
    graph: RiverGraph,
    pair: tuple[str, str],
    window: tuple[int, int],
    *,
    split: Split = Split.STAGE2_TRAIN,
) -> Sample:
    """Fixed A/B/C options; gold follows directed reachability in the graph."""
    first, second = pair
    offset, length = window
    try:
        s1 = graph.stations[first]
        s2 = graph.stations[second]
    except KeyError as exc:
        raise ValueError(f"unknown station {exc.args[0]!r}") from None
    w1 = s1.slice_window(s1.time_at(offset), length)
    w2 = s2.slice_window(s2.time_at(offset), length)

    if graph.has_path(first, second):
        gold = "A"
    elif graph.has_path(second, first):
        gold = "C"
    else:
        gold = "B"

    hours = s1.step // 3600
    context = (
        f"Two water discharge series were measured at {hours}-hour intervals at "
        f"gauging stations along a river network, {length} points each. "
        f"Series 1 is from station {first}; Series 2 is from station {second}. "
        "Determine the causal relation between Series 1 and Series 2."
    )
    return Sample(
        id=sample_id(TaskKind.CAUSALITY, context, [w1, w2]),
        task=TaskKind.CAUSALITY,
        context=context,
        series=(w1, w2),
        options=CAUSALITY_OPTIONS,
        gold=Choice(gold),
        split=split,
    )


def _describe_events(
    events: Sequence[EventRecord], t0_time: int, step: int
) -> tuple[str, ...]:
    lines = []
    for ev in events:
        delta = (ev.time - t0_time) // step
        if delta < 0:
            lines.append(f"{ev.description} ({-delta} hours ago)")
        else:
            lines.append(f"{ev.description} (in {delta} hours)")
    return tuple(lines)


def gen_forecast_qa(
    series: TimeSeries,
    events: Sequence[EventRecord],
    t0: int,
    cfg: GenConfig,
    *,
    split: Split = Split.STAGE2_TRAIN,
) -> Sample:
    """History window ending at index ``t0``; gold is the true next horizon."""
    history_len, horizon = cfg.history_len, cfg.horizon
    if t0 - history_len < 0 or t0 + horizon > len(series):
        raise ValueError("series does not cover the history and horizon windows")
    history = series.slice_window(series.time_at(t0 - history_len), history_len)
    gold_values = series.values[t0 : t0 + horizon]

    t0_time = series.time_at(t0)
    window_events = tuple(
        ev
        for ev in events
        if series.time_at(t0 - history_len) <= ev.time < series.time_at(t0 + horizon)
    )
    described = _describe_events(window_events, t0_time, series.step)
    past = [d for ev, d in zip(window_events, described) if ev.time < t0_time]
    upcoming = [d for ev, d in zip(window_events, described) if ev.time >= t0_time]
    unit = series.unit or "units"
    parts = [
        f"The series shows hourly {unit} for the past {history_len} hours.",
        "Past events: " + ("; ".join(past) if past else "none") + ".",
        "Upcoming events: " + ("; ".join(upcoming) if upcoming else "none") + ".",
        f"Forecast the next {horizon} hours.",
    ]
    context = " ".join(parts)
    return Sample(
        id=sample_id(TaskKind.FORECAST, context, [history]),
        task=TaskKind.FORECAST,
        context=context,
        series=(history,),
        events=window_events,
        horizon=horizon,
        gold=SequenceAnswer(gold_values),
        split=split,
    )


def _sample_strategy(
    rng: np.random.Generator, prices: PriceSchedule, violate: bool
) -> Strategy:
    peak = sorted(prices.peak_hours)
    off_peak = sorted(set(range(24)) - prices.peak_hours)
    pre_peak = [h for h in off_peak if h < min(peak)] or off_peak

    n_charge = int(rng.integers(2, 4))
    charge = set(
        int(h) for h in rng.choice(pre_peak, size=min(n_charge, len(pre_peak)), replace=False)
    )
    n_dis = int(rng.integers(2, 4))
    discharge = set(
        int(h) for h in rng.choice(peak, size=min(n_dis, len(peak)), replace=False)
    )
    if violate:
        if rng.integers(0, 2) == 0:
            candidates = [h for h in off_peak if h not in charge]
            discharge.add(int(candidates[int(rng.integers(0, len(candidates)))]))
        else:
            charge.add(int(peak[int(rng.integers(0, len(peak)))]))
            discharge -= charge
    return Strategy(frozenset(charge), frozenset(discharge))


def gen_decision_qa(
    load_history: TimeSeries,
    spec: BatterySpec,
    prices: PriceSchedule,
    rng: np.random.Generator,
    *,
    split: Split = Split.STAGE2_TRAIN,
    actual_load: Sequence[float] | None = None,
    max_retries: int = 64,
) -> Sample:
    """Four candidate strategies with at least one principle-violating
    distractor; gold maximizes the saving formula among feasible options.

    The saving is computed against ``actual_load`` when given, otherwise
    against the mirror of the most recent day (what a forecast-free planner
    would use).
    """
    if len(load_history) != 48 or load_history.step != 3600:
        raise ValueError("load history must be 48 hourly points")
    basis = tuple(actual_load) if actual_load is not None else load_history.values[24:]
    if len(basis) != 24:
        raise ValueError("actual load must cover 24 hours")

    for _ in range(max_retries):
        n_violating = int(rng.integers(1, 3))
        flags = [True] * n_violating + [False] * (4 - n_violating)
        strategies = [_sample_strategy(rng, prices, violate=f) for f in flags]
        order = rng.permutation(4)
        lettered = [
            (chr(ord("A") + pos), strategies[idx]) for pos, idx in enumerate(order)
        ]
        keys = {(s.charge_hours, s.discharge_hours) for _, s in lettered}
        if len(keys) < 4:
            continue
        ranked = rank_options(lettered, basis, spec, prices)
        feasible = [r for r in ranked if r.feasible]
        if not feasible:
            continue
        if len(feasible) > 1 and feasible[0].saving - feasible[1].saving < 1e-9:
            continue

        context = (
            render_decision_context(spec, prices)
            + " Using the 48-hour load history shown, pick the best battery plan "
            "for the next 24 hours."
        )
        return Sample(
            id=sample_id(TaskKind.DECISION, context, [load_history]),
            task=TaskKind.DECISION,
            context=context,
            series=(load_history,),
            options=tuple((letter, render_strategy(s)) for letter, s in lettered),
            gold=Choice(feasible[0].letter),
            split=split,
        )
    raise ValueError("cannot construct 4 distinct options with a unique best choice")


# -- split assignment ----------------------------------------------------------


@dataclass(frozen=True)
class SplitRules:
    """Tag-driven split routing with a deterministic hash fallback.

    Tags matched against the first series' domain (lower-cased). Unmatched
    samples fall to a seeded train/ID draw: ``train_fraction`` of them train,
    of which ``stage1_fraction`` land in stage 1.
    """

    tag_splits: Mapping[str, Split]
    seed: int = 0
    train_fraction: float = 0.8
    stage1_fraction: float = 0.2
    allow_untagged: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "tag_splits", {k.lower(): v for k, v in dict(self.tag_splits).items()}
        )
        if not 0 <= self.train_fraction <= 1 or not 0 <= self.stage1_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")


DEFAULT_SPLIT_RULES = SplitRules(
    tag_splits={
        "agricultural": Split.TEST_OOD,
        "education": Split.TEST_OOD,
        "healthcare": Split.TEST_OOD,
        "bavaria": Split.TEST_OOD,
        "eweld-electricity": Split.TEST_OOD,
        "building-b": Split.TEST_OOD,
    }
)


def assign_split(sample: Sample, rules: SplitRules) -> Split:
    tag = sample.series[0].domain.lower() if sample.series else ""
    mapped = rules.tag_splits.get(tag)
    if mapped is not None:
        return mapped
    if not tag and not rules.allow_untagged:
        raise ValueError(f"sample {sample.id} has no domain tag and no default rule applies")
    digest = hashlib.sha256(f"{rules.seed}:{sample.id}".encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    if u < rules.train_fraction:
        within = u / rules.train_fraction if rules.train_fraction else 0.0
        return Split.STAGE1_TRAIN if within < rules.stage1_fraction else Split.STAGE2_TRAIN
    return Split.TEST_ID
