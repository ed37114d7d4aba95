"""Seeded synthetic corpora standing in for external data sources.

Everything here is deterministic in (config, index): every series draws from
its own counter-derived RNG stream, so parallel and serial generation emit
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..cards import ScenarioCard
from ..core import EventRecord, Split, TaskKind, TimeSeries

EPOCH_ANCHOR = 1704067200  # 2024-01-01T00:00:00Z, a midnight, keeps hour-of-day = index % 24
HOUR = 3600

TASK_CODE = {
    TaskKind.SCENARIO: 1,
    TaskKind.CAUSALITY: 2,
    TaskKind.FORECAST: 3,
    TaskKind.DECISION: 4,
}
SPLIT_CODE = {
    Split.STAGE1_TRAIN: 1,
    Split.STAGE2_TRAIN: 2,
    Split.TEST_ID: 3,
    Split.TEST_OOD: 4,
}


def stream_rng(seed: int, task: TaskKind, split: Split, index: int) -> np.random.Generator:
    """Per-sample RNG derived by counter, independent of generation order."""
    return np.random.default_rng(
        [seed & 0x7FFFFFFF, TASK_CODE[task], SPLIT_CODE[split], index]
    )


def _default_counts() -> tuple[tuple[TaskKind, Split, int], ...]:
    return tuple(
        (task, split, n)
        for task in TaskKind
        for split, n in (
            (Split.STAGE1_TRAIN, 4),
            (Split.STAGE2_TRAIN, 8),
            (Split.TEST_ID, 6),
            (Split.TEST_OOD, 4),
        )
    )


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    history_len: int = 48
    horizon: int = 24
    counts: tuple[tuple[TaskKind, Split, int], ...] = field(default_factory=_default_counts)
    causality_points: int = 62
    causality_step_hours: int = 12
    allow_shared_length: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple((t, s, int(n)) for t, s, n in self.counts))
        if self.history_len < 1 or self.horizon < 1 or self.causality_points < 4:
            raise ValueError("window sizes out of range")
        if any(n < 0 for _, _, n in self.counts):
            raise ValueError("counts must be non-negative")

    def count(self, task: TaskKind, split: Split) -> int:
        return sum(n for t, s, n in self.counts if t is task and s is split)

    def task_total(self, task: TaskKind) -> int:
        return sum(n for t, _, n in self.counts if t is task)

    @classmethod
    def uniform(cls, seed: int, n_per_cell: int, **kwargs) -> "GenConfig":
        counts = tuple((t, s, n_per_cell) for t in TaskKind for s in Split)
        return cls(seed=seed, counts=counts, **kwargs)


@dataclass(frozen=True)
class RiverGraph:
    stations: Mapping[str, TimeSeries]
    edges: tuple[tuple[str, str], ...]  # (upstream, downstream)
    region: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "stations", dict(self.stations))
        object.__setattr__(self, "edges", tuple((a, b) for a, b in self.edges))
        for src, dst in self.edges:
            if src == dst:
                raise ValueError(f"self-edge at station {src}")
            if src not in self.stations or dst not in self.stations:
                raise ValueError(f"edge ({src}, {dst}) references unknown station")

    def downstream_of(self, station: str) -> list[str]:
        return [dst for src, dst in self.edges if src == station]

    def has_path(self, src: str, dst: str) -> bool:
        """Directed reachability along the flow direction."""
        frontier = [src]
        seen = {src}
        while frontier:
            node = frontier.pop()
            if node == dst:
                return True
            for nxt in self.downstream_of(node):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False


# -- scenario blueprints -------------------------------------------------------

# Fixed card blueprints; per-sample instances jitter the range and regenerate
# the series, so every sample is unique while the distractor pool stays stable.
SCENARIO_BLUEPRINTS: tuple[ScenarioCard, ...] = (
    ScenarioCard(
        "Hourly count of taxi pickups near a downtown sports arena over two weeks.",
        336, (15.0, 92.0), ("daily-cycle", "weekly-cycle"), ("evening-event",), "transport",
    ),
    ScenarioCard(
        "Daily ATM cash withdrawals at a suburban bank branch across one year.",
        365, (200.0, 1400.0), ("weekly-cycle",), ("payday-spike",), "retail",
    ),
    ScenarioCard(
        "Quarter-hourly electricity load of a small office building over one day.",
        96, (2.0, 18.0), ("daily-cycle",), (), "energy",
    ),
    ScenarioCard(
        "Daily closing price of a regional utility stock across a trading year.",
        252, (40.0, 75.0), ("trend",), (), "finance",
    ),
    ScenarioCard(
        "Hourly air temperature from a coastal weather station across one week.",
        168, (-3.0, 24.0), ("daily-cycle",), (), "weather",
    ),
    ScenarioCard(
        "Daily ridership of a commuter rail line over a full year.",
        365, (8000.0, 42000.0), ("weekly-cycle",), ("holiday-dip",), "transport",
    ),
    ScenarioCard(
        "Daily soil moisture readings from an irrigated field across a growing season.",
        180, (10.0, 45.0), ("trend",), ("irrigation-pulse",), "agricultural",
    ),
    ScenarioCard(
        "Hourly occupancy of a university library during a two-week exam period.",
        336, (0.0, 600.0), ("daily-cycle", "weekly-cycle"), ("exam-crunch",), "education",
    ),
    ScenarioCard(
        "Hourly emergency-room arrivals at a city hospital over one week.",
        168, (1.0, 30.0), ("daily-cycle",), ("weekend-peak",), "healthcare",
    ),
)

OOD_SCENARIO_DOMAINS = frozenset({"agricultural", "education", "healthcare"})

_STEP_BY_LENGTH = {336: HOUR, 365: 86400, 96: 900, 252: 86400, 168: HOUR, 180: 86400}


def blueprint_step(card: ScenarioCard) -> int:
    return _STEP_BY_LENGTH[card.expected_length]


def synth_card_series(card: ScenarioCard, rng: np.random.Generator, start: int) -> TimeSeries:
    """Series matching the card: right length, inside the range, card patterns."""
    n = card.expected_length
    step = blueprint_step(card)
    low, high = card.typical_range
    span = high - low
    mid = (low + high) / 2.0
    i = np.arange(n, dtype=float)
    values = np.full(n, mid)

    daily = max(2, round(86400 / step))
    weekly = daily * 7
    if "daily-cycle" in card.pattern_tags:
        values += 0.3 * span * np.sin(2 * np.pi * i / daily + rng.uniform(0, 2 * np.pi))
    if "weekly-cycle" in card.pattern_tags:
        period = weekly if weekly <= n else max(2, n // 4)
        values += 0.2 * span * np.sin(2 * np.pi * i / period + rng.uniform(0, 2 * np.pi))
    if "trend" in card.pattern_tags:
        values += span * 0.3 * (i / n - 0.5) * rng.choice([-1.0, 1.0])
    values += rng.normal(0.0, 0.05 * span, n)
    if card.event_tags:
        for _ in range(int(rng.integers(1, 4))):
            at = int(rng.integers(0, max(1, n - 3)))
            bump = rng.uniform(0.2, 0.4) * span
            for k, decay in enumerate((1.0, 0.7, 0.4)):
                if at + k < n:
                    values[at + k] += bump * decay
    values = np.clip(values, low, high)
    return TimeSeries(
        values=tuple(float(v) for v in np.round(values, 4)),
        start=start,
        step=step,
        unit="",
        domain=card.domain_tag,
    )


def scenario_instance(
    cfg: GenConfig, split: Split, index: int, rng: np.random.Generator | None = None
) -> tuple[ScenarioCard, TimeSeries, list[ScenarioCard]]:
    """True card (jittered), its series, and the distractor pool."""
    if rng is None:
        rng = stream_rng(cfg.seed, TaskKind.SCENARIO, split, index)
    if split is Split.TEST_OOD:
        candidates = [c for c in SCENARIO_BLUEPRINTS if c.domain_tag in OOD_SCENARIO_DOMAINS]
    else:
        candidates = [c for c in SCENARIO_BLUEPRINTS if c.domain_tag not in OOD_SCENARIO_DOMAINS]
    base = candidates[int(rng.integers(0, len(candidates)))]
    low, high = base.typical_range
    span = high - low
    jitter = rng.uniform(-0.02, 0.02, 2) * span
    true_card = ScenarioCard(
        description=base.description,
        expected_length=base.expected_length,
        typical_range=(round(low + jitter[0], 2), round(high + jitter[1], 2)),
        pattern_tags=base.pattern_tags,
        event_tags=base.event_tags,
        domain_tag=base.domain_tag,
    )
    series = synth_card_series(true_card, rng, EPOCH_ANCHOR)
    pool = [c for c in SCENARIO_BLUEPRINTS if c.description != base.description]
    if not cfg.allow_shared_length:
        tol = 0.02 * true_card.expected_length
        pool = [c for c in pool if abs(c.expected_length - true_card.expected_length) > tol]
    return true_card, series, pool


# -- river networks ------------------------------------------------------------


def _synth_river_tree(
    rng: np.random.Generator, tree_id: int, n_points: int, step: int, region: str
) -> RiverGraph:
    n_nodes = int(rng.integers(4, 8))
    parents = [-1] + [int(rng.integers(0, i)) for i in range(1, n_nodes)]
    weekly = max(4, round(7 * 86400 / step))
    # per-catchment season: one period + phase per tree, so stations of the
    # same tree co-move while separate trees decorrelate
    period = max(6.0, weekly * (0.6, 1.1, 1.6)[tree_id % 3])
    tree_phase = float(rng.uniform(0, 2 * np.pi))
    scales = rng.uniform(1.0, 3.0, n_nodes)
    jitter = rng.uniform(-0.1, 0.1, n_nodes)
    i = np.arange(n_points, dtype=float)
    runoff = [
        np.clip(
            s * (1.2 + 0.5 * np.sin(2 * np.pi * i / period + tree_phase + j))
            + rng.normal(0.0, 0.08 * s, n_points),
            0.05,
            None,
        )
        for s, j in zip(scales, jitter)
    ]
    # regional storms hit every station of the tree at once; routing through
    # the accumulation below turns them into lagged downstream peaks
    n_storms = int(rng.integers(3, 6))
    storm_times = rng.choice(np.arange(3, n_points - 5), size=n_storms, replace=False)
    storm_amps = rng.uniform(1.5, 3.0, n_storms)
    for t, amp in zip(storm_times, storm_amps):
        for k in range(n_nodes):
            runoff[k][t] += amp * scales[k]
            runoff[k][t + 1] += 0.5 * amp * scales[k]
    children: dict[int, list[int]] = {k: [] for k in range(n_nodes)}
    for node, parent in enumerate(parents):
        if parent >= 0:
            children[parent].append(node)

    discharge: dict[int, np.ndarray] = {}

    def accumulate(node: int) -> np.ndarray:
        total = runoff[node].copy()
        for child in children[node]:
            up = accumulate(child)
            total += np.concatenate(([up[0]], up[:-1]))  # one-step travel lag
        discharge[node] = total
        return total

    accumulate(0)
    names = [f"S{tree_id}{chr(ord('A') + k)}" for k in range(n_nodes)]
    stations = {
        names[k]: TimeSeries(
            values=tuple(float(v) for v in np.round(discharge[k], 4)),
            start=EPOCH_ANCHOR,
            step=step,
            unit="m3/s",
            domain=region,
        )
        for k in range(n_nodes)
    }
    edges = tuple(
        (names[node], names[parent]) for node, parent in enumerate(parents) if parent >= 0
    )
    return RiverGraph(stations=stations, edges=edges, region=region)


def synth_rivers(cfg: GenConfig) -> tuple[RiverGraph, ...]:
    """One graph per region, each holding several disjoint river trees so that
    unconnected pairs exist inside a single graph; series long enough for
    shifting windows."""
    step = cfg.causality_step_hours * HOUR
    n_points = cfg.causality_points + cfg.task_total(TaskKind.CAUSALITY) + 8
    graphs = []
    for region, code, n_trees in (("eastern-germany", 1, 3), ("bavaria", 2, 2)):
        stations: dict[str, TimeSeries] = {}
        edges: list[tuple[str, str]] = []
        for t in range(n_trees):
            rng = np.random.default_rng([cfg.seed & 0x7FFFFFFF, 20 + code, t])
            tree = _synth_river_tree(rng, code * 10 + t, n_points, step, region)
            stations.update(tree.stations)
            edges.extend(tree.edges)
        graphs.append(RiverGraph(stations=stations, edges=tuple(edges), region=region))
    return tuple(graphs)


# -- event-driven demand series ------------------------------------------------

_TAXI_PROFILE = np.array(
    [5, 3, 2, 2, 3, 5, 10, 20, 30, 35, 38, 40, 42, 40, 38, 36, 38, 45, 55, 65, 60, 45, 30, 15],
    dtype=float,
)
_ELECTRIC_PROFILE = np.array(
    [12, 10, 9, 9, 10, 14, 25, 45, 60, 70, 72, 70, 65, 68, 70, 66, 60, 50, 40, 30, 25, 20, 16, 13],
    dtype=float,
)
_EVENT_KINDS = ("concert", "boxing match", "basketball game", "comedy show")


def synth_event_series(
    cfg: GenConfig, domain: str, index: int, n_points: int
) -> tuple[TimeSeries, tuple[EventRecord, ...]]:
    """Hourly demand with a daily profile plus additive bumps at event hours."""
    rng = np.random.default_rng([cfg.seed & 0x7FFFFFFF, 30, 1 if domain == "taxi" else 2, index])
    profile = _TAXI_PROFILE if domain == "taxi" else _ELECTRIC_PROFILE
    unit = "pickups" if domain == "taxi" else "kWh"
    scale = rng.uniform(0.8, 1.3)
    hours = np.arange(n_points)
    values = profile[hours % 24] * scale
    values *= 1.0 + 0.08 * np.sin(2 * np.pi * hours / (24 * 7) + rng.uniform(0, 2 * np.pi))
    values += rng.normal(0.0, 0.05 * profile.max() * scale, n_points)

    events = []
    taken = set()
    n_events = max(2, n_points // 36)
    peak = profile.max() * scale
    for _ in range(n_events):
        at = int(rng.integers(12, n_points - 4))
        hour_of_day = at % 24
        if not 15 <= hour_of_day <= 21:  # evening happenings only, like real venues
            at += (18 - hour_of_day) % 24
        if at >= n_points - 4 or at in taken:
            continue
        taken.add(at)
        kind = _EVENT_KINDS[int(rng.integers(0, len(_EVENT_KINDS)))]
        bump = rng.uniform(0.8, 1.5) * peak
        for k, decay in enumerate((1.0, 0.7, 0.4)):
            values[at + k] += bump * decay
        when = EPOCH_ANCHOR + at * HOUR
        events.append(EventRecord(time=when, description=f"{kind} at the arena, {at % 24:02d}:00"))
    values = np.clip(values, 0.0, None)
    series = TimeSeries(
        values=tuple(float(v) for v in np.round(values, 4)),
        start=EPOCH_ANCHOR,
        step=HOUR,
        unit=unit,
        domain=domain,
    )
    return series, tuple(sorted(events, key=lambda e: e.time))


# -- household load ------------------------------------------------------------

_LOAD_PROFILE = np.array(
    [0.8, 0.6, 0.5, 0.5, 0.6, 0.9, 1.8, 2.8, 2.2, 1.6, 1.4, 1.3,
     1.5, 1.4, 1.3, 1.6, 2.2, 3.2, 4.2, 4.0, 3.4, 2.6, 1.8, 1.1],
    dtype=float,
)


def synth_load_series(cfg: GenConfig, building: str, index: int, n_points: int) -> TimeSeries:
    rng = np.random.default_rng(
        [cfg.seed & 0x7FFFFFFF, 40, 1 if building == "building-a" else 2, index]
    )
    scale = (1.0 if building == "building-a" else 1.6) * rng.uniform(0.85, 1.2)
    hours = np.arange(n_points)
    values = _LOAD_PROFILE[hours % 24] * scale
    values += rng.normal(0.0, 0.12 * scale, n_points)
    values = np.clip(values, 0.1, None)
    return TimeSeries(
        values=tuple(float(v) for v in np.round(values, 4)),
        start=EPOCH_ANCHOR,
        step=HOUR,
        unit="kW",
        domain=building,
    )


@dataclass(frozen=True)
class Corpus:
    rivers: tuple[RiverGraph, ...]
    event_series: tuple[tuple[TimeSeries, tuple[EventRecord, ...]], ...]
    load_series: tuple[TimeSeries, ...]


def synth_corpus(cfg: GenConfig) -> Corpus:
    """Raw material sized to the configured counts (scenario instances are
    produced per sample by scenario_instance, not stored here)."""
    n_forecast = cfg.task_total(TaskKind.FORECAST)
    n_event_points = cfg.history_len + cfg.horizon + n_forecast + 8
    n_decision = cfg.task_total(TaskKind.DECISION)
    n_load_points = 48 + 24 + n_decision + 8
    return Corpus(
        rivers=synth_rivers(cfg),
        event_series=(
            synth_event_series(cfg, "taxi", 0, n_event_points),
            synth_event_series(cfg, "taxi", 1, n_event_points),
            synth_event_series(cfg, "eweld-electricity", 0, n_event_points),
        ),
        load_series=(
            synth_load_series(cfg, "building-a", 0, n_load_points),
            synth_load_series(cfg, "building-b", 0, n_load_points),
        ),
    )
