"""Whole-dataset assembly driven by GenConfig counts."""

from __future__ import annotations

from typing import Any

from ..battery import BatterySpec, PriceSchedule
from ..core import Sample, Split, TaskKind, check_split_partition, validate_sample
from .corpus import Corpus, GenConfig, scenario_instance, stream_rng, synth_corpus
from .qa import gen_causality_qa, gen_decision_qa, gen_forecast_qa, gen_scenario_qa

_REGION_BY_SPLIT = {
    Split.STAGE1_TRAIN: "eastern-germany",
    Split.STAGE2_TRAIN: "eastern-germany",
    Split.TEST_ID: "eastern-germany",
    Split.TEST_OOD: "bavaria",
}
_EVENT_DOMAIN_BY_SPLIT = {
    Split.STAGE1_TRAIN: "taxi",
    Split.STAGE2_TRAIN: "taxi",
    Split.TEST_ID: "taxi",
    Split.TEST_OOD: "eweld-electricity",
}
_BUILDING_BY_SPLIT = {
    Split.STAGE1_TRAIN: "building-a",
    Split.STAGE2_TRAIN: "building-a",
    Split.TEST_ID: "building-a",
    Split.TEST_OOD: "building-b",
}


def _window_offset(cfg: GenConfig, task: TaskKind, split: Split, index: int) -> int:
    """Source-window offset unique across splits, so no two samples of a task
    ever share the exact same slice of a shared raw series."""
    earlier = sum(cfg.count(task, s) for s in Split if list(Split).index(s) < list(Split).index(split))
    return earlier + index


def _build_scenario(cfg: GenConfig, corpus: Corpus, split: Split, index: int) -> Sample:
    rng = stream_rng(cfg.seed, TaskKind.SCENARIO, split, index)
    card, series, pool = scenario_instance(cfg, split, index, rng)
    return gen_scenario_qa(card, series, pool, rng, split=split)


def _build_causality(cfg: GenConfig, corpus: Corpus, split: Split, index: int) -> Sample:
    rng = stream_rng(cfg.seed, TaskKind.CAUSALITY, split, index)
    region = _REGION_BY_SPLIT[split]
    graph = next(g for g in corpus.rivers if g.region == region)
    names = sorted(graph.stations)
    # direct confluences only: one routing hop keeps the physical lag short
    causal = sorted(graph.edges)
    unrelated = [
        (a, b)
        for a in names
        for b in names
        if a < b and not graph.has_path(a, b) and not graph.has_path(b, a)
    ]
    kind = index % 3
    if kind == 0:
        pair = causal[int(rng.integers(0, len(causal)))]
    elif kind == 1:
        up, down = causal[int(rng.integers(0, len(causal)))]
        pair = (down, up)
    else:
        pair = unrelated[int(rng.integers(0, len(unrelated)))]
    offset = _window_offset(cfg, TaskKind.CAUSALITY, split, index)
    return gen_causality_qa(graph, pair, (offset, cfg.causality_points), split=split)


def _build_forecast(cfg: GenConfig, corpus: Corpus, split: Split, index: int) -> Sample:
    rng = stream_rng(cfg.seed, TaskKind.FORECAST, split, index)
    domain = _EVENT_DOMAIN_BY_SPLIT[split]
    pool = [(s, ev) for s, ev in corpus.event_series if s.domain == domain]
    series, events = pool[int(rng.integers(0, len(pool)))]
    t0 = cfg.history_len + _window_offset(cfg, TaskKind.FORECAST, split, index)
    return gen_forecast_qa(series, events, t0, cfg, split=split)


def _build_decision(cfg: GenConfig, corpus: Corpus, split: Split, index: int) -> Sample:
    rng = stream_rng(cfg.seed, TaskKind.DECISION, split, index)
    building = _BUILDING_BY_SPLIT[split]
    load = next(s for s in corpus.load_series if s.domain == building)
    offset = _window_offset(cfg, TaskKind.DECISION, split, index)
    history = load.slice_window(load.time_at(offset), 48)
    spec = BatterySpec(
        capacity_kwh=float(rng.integers(12, 25)),
        initial_soc_kwh=round(float(rng.uniform(0.15, 0.4)) * 20.0, 1),
        max_charge_kw=float(rng.integers(4, 7)),
        max_discharge_kw=float(rng.integers(8, 13)),
    )
    peak_start = int(rng.integers(15, 18))
    peak_len = int(rng.integers(4, 6))
    prices = PriceSchedule(
        peak_hours=frozenset(range(peak_start, min(24, peak_start + peak_len))),
        price_peak=round(float(rng.uniform(0.45, 0.6)), 2),
        price_valley=round(float(rng.uniform(0.18, 0.26)), 2),
    )
    return gen_decision_qa(history, spec, prices, rng, split=split)


_BUILDERS = {
    TaskKind.SCENARIO: _build_scenario,
    TaskKind.CAUSALITY: _build_causality,
    TaskKind.FORECAST: _build_forecast,
    TaskKind.DECISION: _build_decision,
}


def build_dataset(cfg: GenConfig, corpus: Corpus | None = None) -> list[Sample]:
    """All configured samples in (task, split, index) order, fully validated."""
    if corpus is None:
        corpus = synth_corpus(cfg)
    samples: list[Sample] = []
    for task in TaskKind:
        for split in Split:
            for index in range(cfg.count(task, split)):
                samples.append(_BUILDERS[task](cfg, corpus, split, index))

    problems: list[str] = []
    seen_ids: set[str] = set()
    for s in samples:
        problems.extend(validate_sample(s))
        if s.id in seen_ids:
            problems.append(f"duplicate sample id {s.id}")
        seen_ids.add(s.id)
    problems.extend(check_split_partition(samples))
    if problems:
        raise ValueError("generated dataset is invalid: " + "; ".join(problems[:5]))
    return samples


def dataset_meta(cfg: GenConfig) -> dict[str, Any]:
    """Reproducibility header content for dataset files."""
    return {
        "seed": cfg.seed,
        "history_len": cfg.history_len,
        "horizon": cfg.horizon,
        "counts": [[t.value, s.value, n] for t, s, n in cfg.counts],
        "causality_points": cfg.causality_points,
        "causality_step_hours": cfg.causality_step_hours,
        "allow_shared_length": cfg.allow_shared_length,
    }
