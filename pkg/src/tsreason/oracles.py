"""Deterministic per-task solvers that follow the guided elimination recipes.

Each solver walks ordered steps, records an observation per step, and keeps a
monotonically shrinking set of surviving options. Solvers never see gold
labels; the harness grades them like any other responder. Fuzzy judgments are
reduced to explicit numeric gates, all exposed as configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .battery import parse_decision_context, parse_strategy, rank_options
from .cards import ScenarioCard, parse_card
from .core import AnswerValue, Choice, Sample, SequenceAnswer, TaskKind


@dataclass(frozen=True)
class TraceStep:
    name: str
    observation: str
    surviving: tuple[str, ...]


@dataclass(frozen=True)
class OracleTrace:
    steps: tuple[TraceStep, ...]
    final: AnswerValue

    def render(self) -> str:
        """Think/answer text in the response schema the parser accepts."""
        lines = [
            f"Step {i} ({s.name}): {s.observation} Remaining: {', '.join(s.surviving) or '-'}."
            for i, s in enumerate(self.steps, start=1)
        ]
        if isinstance(self.final, Choice):
            answer = self.final.letter
        else:
            answer = ", ".join(repr(v) for v in self.final.values)
        return f"<think>{' '.join(lines)}</think><answer>{answer}</answer>"


# -- scenario matching ----------------------------------------------------------


def _autocorr(values: np.ndarray, lag: int) -> float:
    if lag < 1 or lag >= len(values):
        return 0.0
    a, b = values[:-lag], values[lag:]
    if a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def _detect_patterns(values: np.ndarray, step: int) -> set[str]:
    found: set[str] = set()
    n = len(values)
    daily = max(2, round(86400 / step))
    if daily <= n // 2 and _autocorr(values, daily) > 0.3:
        found.add("daily-cycle")
    weekly = daily * 7
    if weekly <= n // 2 and _autocorr(values, weekly) > 0.3:
        found.add("weekly-cycle")
    idx = np.arange(n, dtype=float)
    if values.std() > 0:
        if abs(float(np.corrcoef(idx, values)[0, 1])) > 0.5:
            found.add("trend")
    return found


def _spike_score(values: np.ndarray) -> float:
    std = values.std()
    if std == 0:
        return 0.0
    return float(np.max(np.abs(values - values.mean())) / std)


def solve_scenario(sample: Sample, length_tolerance: float = 0.02) -> OracleTrace:
    """Six-step elimination: length, range, patterns, events, summary, and a
    final length re-check; unique survivor wins, otherwise the option passing
    the most gates (ties to the lowest letter)."""
    cards: dict[str, ScenarioCard | None] = {}
    for letter, text in sample.options:
        try:
            cards[letter] = parse_card(text)
        except Exception:
            cards[letter] = None
    if all(c is None for c in cards.values()):
        raise ValueError("no option text yields a parseable expected length")

    values = np.asarray(sample.series[0].values, dtype=float)
    n = len(values)
    obs_lo, obs_hi = float(values.min()), float(values.max())
    detected = _detect_patterns(values, sample.series[0].step)
    spike = _spike_score(values)

    def length_ok(card: ScenarioCard) -> bool:
        return abs(card.expected_length - n) <= length_tolerance * card.expected_length

    def range_ok(card: ScenarioCard) -> bool:
        lo = max(obs_lo, card.typical_range[0])
        hi = min(obs_hi, card.typical_range[1])
        span = obs_hi - obs_lo
        if span == 0:
            return card.typical_range[0] <= obs_lo <= card.typical_range[1]
        return (hi - lo) / span >= 0.5

    def pattern_ok(card: ScenarioCard) -> bool:
        stated = set(card.pattern_tags)
        if not stated:
            return True
        return bool(stated & detected)

    def event_ok(card: ScenarioCard) -> bool:
        return spike >= 1.5 if card.event_tags else spike <= 3.5

    gates = (
        ("length-check", length_ok, f"series has {n} points"),
        ("range-check", range_ok, f"observed values span {obs_lo:g} to {obs_hi:g}"),
        ("pattern-check", pattern_ok, f"detected patterns: {sorted(detected) or 'none'}"),
        ("event-check", event_ok, f"largest deviation is {spike:.2f} standard units"),
    )

    letters = [letter for letter, _ in sample.options]
    passed: dict[str, int] = {letter: 0 for letter in letters}
    surviving = list(letters)
    steps: list[TraceStep] = []
    for name, gate, what in gates:
        ok = [l for l in letters if cards[l] is not None and gate(cards[l])]
        for l in ok:
            passed[l] += 1
        keep = [l for l in surviving if l in ok]
        if keep:
            surviving = keep
            note = f"{what}; kept {', '.join(keep)}."
        else:
            note = f"{what}; gate inconclusive, keeping all candidates."
        steps.append(TraceStep(name, note, tuple(surviving)))

    steps.append(
        TraceStep(
            "elimination",
            f"options passing per-gate counts: "
            + ", ".join(f"{l}={passed[l]}" for l in letters),
            tuple(surviving),
        )
    )
    recheck = [l for l in surviving if cards[l] is not None and length_ok(cards[l])]
    if recheck:
        surviving = recheck
    if len(surviving) == 1:
        final = surviving[0]
        note = f"single candidate {final} confirmed by length re-check."
    else:
        final = max(surviving, key=lambda l: (passed[l], -ord(l)))
        note = f"no unique survivor; best-scoring candidate is {final}."
    steps.append(TraceStep("length-recheck", note, (final,)))
    return OracleTrace(steps=tuple(steps), final=Choice(final))


# -- causality direction ---------------------------------------------------------


@dataclass(frozen=True)
class CausalityGates:
    trend_window: int = 2
    lag_reject: int = 3
    smooth_window: int = 3
    slope_agree: float = 0.7
    peak_z: float = 0.5


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1 or len(values) < window:
        return values.astype(float)
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def _trend_agreement(d1: np.ndarray, d2: np.ndarray, max_shift: int) -> float:
    best = 0.0
    for shift in range(-max_shift, max_shift + 1):
        if shift >= 0:
            a, b = d1[: len(d1) - shift or None], d2[shift:]
        else:
            a, b = d1[-shift:], d2[: len(d2) + shift]
        m = min(len(a), len(b))
        if m == 0:
            continue
        a, b = a[:m], b[:m]
        sa, sb = np.sign(a), np.sign(b)
        agree = (sa == sb) | (sa == 0) | (sb == 0)  # flat steps match anything
        best = max(best, float(agree.mean()))
    return best


def _peaks(values: np.ndarray, z: float) -> list[int]:
    if len(values) < 3 or values.std() == 0:
        return []
    threshold = values.mean() + z * values.std()
    return [
        i
        for i in range(1, len(values) - 1)
        if values[i] > values[i - 1] and values[i] > values[i + 1] and values[i] > threshold
    ]


def solve_causality(sample: Sample, gates: CausalityGates = CausalityGates()) -> OracleTrace:
    """Trend agreement, then peak alignment, then direction by magnitude:
    upstream flows are smaller, so the lower-mean series is the cause."""
    v1 = np.asarray(sample.series[0].values, dtype=float)
    v2 = np.asarray(sample.series[1].values, dtype=float)
    sm1, sm2 = _smooth(v1, gates.smooth_window), _smooth(v2, gates.smooth_window)
    steps: list[TraceStep] = []
    surviving = ("A", "B", "C")

    agree = _trend_agreement(np.diff(sm1), np.diff(sm2), gates.trend_window)
    trend_ok = agree >= gates.slope_agree
    if not trend_ok:
        surviving = ("B",)
    steps.append(
        TraceStep(
            "trend-consistency",
            f"best slope-sign agreement within +/-{gates.trend_window} steps is {agree:.2f} "
            f"(threshold {gates.slope_agree:g}).",
            surviving,
        )
    )

    if trend_ok:
        p1, p2 = _peaks(sm1, gates.peak_z), _peaks(sm2, gates.peak_z)
        if p1 and p2:
            lags = [min(abs(i - j) for j in p2) for i in p1]
            lag = float(np.median(lags))
            if lag >= gates.lag_reject:
                surviving = ("B",)
            note = f"median peak misalignment is {lag:g} steps (reject at >= {gates.lag_reject})."
        elif p1 or p2:
            surviving = ("B",)
            note = "prominent peaks exist in only one series; shapes do not correspond."
        else:
            note = "no prominent peaks on either side; relying on the trend gate alone."
        steps.append(TraceStep("peak-alignment", note, surviving))

    if surviving == ("B",):
        final = "B"
        steps.append(
            TraceStep("direction", "shape gates rejected a causal link.", ("B",))
        )
    else:
        m1, m2 = float(v1.mean()), float(v2.mean())
        if m1 < m2:
            final = "A"
            note = f"mean of Series 1 ({m1:.2f}) is below Series 2 ({m2:.2f}); flow runs 1 -> 2."
        elif m1 > m2:
            final = "C"
            note = f"mean of Series 1 ({m1:.2f}) exceeds Series 2 ({m2:.2f}); flow runs 2 -> 1."
        else:
            final = "A"
            note = "means are equal; direction tie, defaulting to Series 1 as the cause."
        steps.append(TraceStep("direction", note, (final,)))
    return OracleTrace(steps=tuple(steps), final=Choice(final))


# -- event-aware forecasting -----------------------------------------------------


def _hour_of_day(time: int) -> int:
    return (time // 3600) % 24


def solve_forecast(sample: Sample) -> tuple[SequenceAnswer, OracleTrace]:
    """Seasonal-naive baseline from the most recent event-free day, plus an
    additive overlay copied from the most similar past event window."""
    history = sample.series[0]
    values = np.asarray(history.values, dtype=float)
    n = len(values)
    horizon = sample.horizon or 24
    end_time = history.time_at(n)
    steps: list[TraceStep] = []

    if history.step != 3600 or n < 24:
        forecast = np.full(horizon, values[-1])
        steps.append(
            TraceStep(
                "baseline",
                "no hour-of-day structure available; repeating the last value.",
                (),
            )
        )
        answer = SequenceAnswer(tuple(float(v) for v in forecast))
        steps.append(TraceStep("event-overlay", "skipped.", ()))
        return answer, OracleTrace(steps=tuple(steps), final=answer)

    past_positions: list[int] = []
    upcoming: list = []
    for ev in sample.events:
        pos = (ev.time - history.start) // history.step
        if 0 <= pos < n:
            past_positions.append(int(pos))
        elif ev.time >= end_time:
            upcoming.append(ev)

    def affected(day_lo: int, day_hi: int) -> bool:
        return any(day_lo <= p + k < day_hi for p in past_positions for k in range(3))

    have_two_days = n >= 48
    day2_clean = not affected(n - 24, n)
    day1_clean = have_two_days and not affected(n - 48, n - 24)
    if day2_clean:
        baseline = values[n - 24 : n].copy()
        which = "the most recent day (event-free)"
    elif day1_clean:
        baseline = values[n - 48 : n - 24].copy()
        which = "the previous day (recent day was event-affected)"
    elif have_two_days:
        baseline = (values[n - 24 : n] + values[n - 48 : n - 24]) / 2.0
        which = "the average of both days (no event-free day available)"
    else:
        baseline = values[n - 24 : n].copy()
        which = "the only available day"
    forecast = np.array([baseline[j % 24] for j in range(horizon)])
    steps.append(
        TraceStep("baseline", f"hour-of-day profile taken from {which}.", ())
    )

    def history_baseline_at(pos: int) -> float:
        if have_two_days:
            other = pos - 24 if pos >= 24 else pos + 24
            return float(values[other])
        return float(baseline[pos % 24])

    overlay_notes = []
    for ev in upcoming:
        j0 = (ev.time - end_time) // history.step
        if not 0 <= j0 < horizon or not past_positions:
            continue
        target_hod = _hour_of_day(ev.time)

        def hod_distance(pos: int) -> int:
            d = abs(_hour_of_day(history.time_at(pos)) - target_hod)
            return min(d, 24 - d)

        source = min(past_positions, key=lambda p: (hod_distance(p), -p))
        for k in range(3):
            if source + k < n and j0 + k < horizon:
                bump = values[source + k] - history_baseline_at(source + k)
                forecast[j0 + k] += max(0.0, bump)
        overlay_notes.append(
            f"lifted the extra demand around history hour {source} onto forecast "
            f"hours {j0}-{min(int(j0) + 2, horizon - 1)}"
        )
    steps.append(
        TraceStep(
            "event-overlay",
            ("; ".join(overlay_notes) + ".") if overlay_notes else "no upcoming event applies.",
            (),
        )
    )
    forecast = np.clip(forecast, 0.0, None)
    answer = SequenceAnswer(tuple(round(float(v), 4) for v in forecast))
    return answer, OracleTrace(steps=tuple(steps), final=answer)


# -- battery decision -------------------------------------------------------------


def solve_decision(sample: Sample) -> OracleTrace:
    """Mirror the most recent day as the load estimate, drop rule-violating
    options, rank the rest by the saving formula."""
    spec, prices = parse_decision_context(sample.context)
    strategies = [(letter, parse_strategy(text)) for letter, text in sample.options]
    history = sample.series[0]
    forecast = history.values[-24:]
    steps: list[TraceStep] = []
    letters = tuple(letter for letter, _ in strategies)

    steps.append(
        TraceStep(
            "mirror-forecast",
            "estimated next-day load by reusing the most recent 24 hours: "
            + ", ".join(f"{v:g}" for v in forecast),
            letters,
        )
    )
    ranked = rank_options(strategies, forecast, spec, prices)
    feasible = [r for r in ranked if r.feasible]
    if feasible:
        surviving = tuple(sorted(r.letter for r in feasible))
        note = "dropped options violating charge/discharge timing rules: " + (
            ", ".join(f"{r.letter} ({r.reason})" for r in ranked if not r.feasible) or "none"
        )
    else:
        surviving = letters
        note = "every option violates a timing rule; falling back to the full set."
    steps.append(TraceStep("feasibility", note + ".", surviving))

    savings = ", ".join(f"{r.letter}=${r.saving:.4f}" for r in ranked if r.letter in surviving)
    if feasible:
        final = ranked[0].letter
    else:
        final = min(letters)
    steps.append(
        TraceStep("saving-ranking", f"expected savings: {savings}.", (final,))
    )
    return OracleTrace(steps=tuple(steps), final=Choice(final))


def solve(sample: Sample) -> OracleTrace:
    """Dispatch on task; forecasting returns the trace with the sequence final."""
    if sample.task is TaskKind.SCENARIO:
        return solve_scenario(sample)
    if sample.task is TaskKind.CAUSALITY:
        return solve_causality(sample)
    if sample.task is TaskKind.FORECAST:
        return solve_forecast(sample)[1]
    return solve_decision(sample)
