"""Deterministic battery arbitrage environment for the decision task.

One-hour steps; kW and kWh are numerically interchangeable. The saving
formula prices each discharged kWh at the peak-valley spread and ignores
charging cost — it defines gold labels. ``simulate`` additionally reports
exact cost accounting for analysis; it never defines gold.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Sequence

from .core import RecordError, TimeSeries

HOURS = 24


@dataclass(frozen=True)
class BatterySpec:
    capacity_kwh: float
    initial_soc_kwh: float
    max_charge_kw: float
    max_discharge_kw: float

    def __post_init__(self) -> None:
        if self.capacity_kwh <= 0 or self.max_charge_kw <= 0 or self.max_discharge_kw <= 0:
            raise ValueError("capacity and power limits must be positive")
        if not 0 <= self.initial_soc_kwh <= self.capacity_kwh:
            raise ValueError("initial SoC must lie in [0, capacity]")


@dataclass(frozen=True)
class PriceSchedule:
    peak_hours: frozenset[int]
    price_peak: float
    price_valley: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "peak_hours", frozenset(self.peak_hours))
        if not self.peak_hours <= set(range(HOURS)):
            raise ValueError("peak hours must be hour indices 0-23")
        if not self.price_peak > self.price_valley > 0:
            raise ValueError("prices must satisfy peak > valley > 0")

    def price(self, hour: int) -> float:
        return self.price_peak if hour in self.peak_hours else self.price_valley

    @property
    def spread(self) -> float:
        return self.price_peak - self.price_valley


@dataclass(frozen=True)
class Strategy:
    charge_hours: frozenset[int]
    discharge_hours: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "charge_hours", frozenset(self.charge_hours))
        object.__setattr__(self, "discharge_hours", frozenset(self.discharge_hours))
        if self.charge_hours & self.discharge_hours:
            raise ValueError("charge and discharge hours must be disjoint")
        if not (self.charge_hours | self.discharge_hours) <= set(range(HOURS)):
            raise ValueError("strategy hours must be hour indices 0-23")

    def principle_violations(self, prices: PriceSchedule) -> list[str]:
        """Rule-of-thumb violations: charging in peak or discharging off-peak."""
        out = []
        if self.charge_hours & prices.peak_hours:
            out.append("charge-in-peak")
        if self.discharge_hours - prices.peak_hours:
            out.append("discharge-off-peak")
        return out


@dataclass(frozen=True)
class SimResult:
    soc_trajectory: tuple[float, ...]
    energy_charged: tuple[float, ...]
    energy_discharged: tuple[float, ...]
    exact_cost: float
    baseline_cost: float
    formula_saving: float
    violations: tuple[str, ...]

    @property
    def exact_saving(self) -> float:
        return self.baseline_cost - self.exact_cost


def formula_saving(
    strategy: Strategy,
    forecast_load: Sequence[float],
    spec: BatterySpec,
    prices: PriceSchedule,
) -> float:
    """Expected saving: per discharged peak hour, min(load, max discharge)
    times the peak-valley spread. Hours outside the peak window earn nothing.
    """
    if len(forecast_load) != HOURS:
        raise ValueError(f"forecast must cover {HOURS} hours")
    return sum(
        min(forecast_load[h], spec.max_discharge_kw) * prices.spread
        for h in sorted(strategy.discharge_hours & prices.peak_hours)
    )


def simulate(
    strategy: Strategy,
    actual_load: Sequence[float],
    spec: BatterySpec,
    prices: PriceSchedule,
) -> SimResult:
    """Hour-by-hour SoC dynamics with clamping and exact cost accounting.

    Charging is capped by headroom; discharging by SoC and by the hour's load
    (no grid export). Clamps never fail the run, they are reported.
    """
    if len(actual_load) != HOURS:
        raise ValueError(f"load must cover {HOURS} hours")
    if any(v < 0 for v in actual_load):
        raise ValueError("load must be non-negative")

    violations = list(strategy.principle_violations(prices))
    soc = spec.initial_soc_kwh
    trajectory = [soc]
    charged = []
    discharged = []
    exact_cost = 0.0
    baseline_cost = 0.0

    for h in range(HOURS):
        charge = 0.0
        discharge = 0.0
        if h in strategy.charge_hours:
            charge = min(spec.max_charge_kw, spec.capacity_kwh - soc)
            if charge < spec.max_charge_kw:
                violations.append(f"charge-clamped@{h}")
        elif h in strategy.discharge_hours:
            discharge = min(spec.max_discharge_kw, soc, actual_load[h])
            if discharge < min(spec.max_discharge_kw, actual_load[h]):
                violations.append(f"discharge-clamped@{h}")
        soc = soc + charge - discharge
        trajectory.append(soc)
        charged.append(charge)
        discharged.append(discharge)
        exact_cost += (actual_load[h] - discharge + charge) * prices.price(h)
        baseline_cost += actual_load[h] * prices.price(h)

    return SimResult(
        soc_trajectory=tuple(trajectory),
        energy_charged=tuple(charged),
        energy_discharged=tuple(discharged),
        exact_cost=exact_cost,
        baseline_cost=baseline_cost,
        formula_saving=formula_saving(strategy, actual_load, spec, prices),
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class RankedOption:
    letter: str
    strategy: Strategy
    saving: float
    feasible: bool
    reason: str = ""


def rank_options(
    options: Sequence[tuple[str, Strategy]],
    forecast_load: Sequence[float],
    spec: BatterySpec,
    prices: PriceSchedule,
) -> list[RankedOption]:
    """Feasible options by saving (descending), infeasible last with a reason.

    Ties break toward the lowest letter so the ranking is a total order.
    """
    if not options:
        raise ValueError("at least one option required")
    ranked = []
    for letter, strategy in options:
        viols = strategy.principle_violations(prices)
        saving = formula_saving(strategy, forecast_load, spec, prices)
        ranked.append(
            RankedOption(
                letter=letter,
                strategy=strategy,
                saving=saving,
                feasible=not viols,
                reason=", ".join(viols),
            )
        )
    ranked.sort(key=lambda r: (not r.feasible, -r.saving, r.letter))
    return ranked


# -- option and context text grammar ------------------------------------------
#
# The generator renders strategies and battery settings into prompt text; the
# template solver parses the same text back. Both directions live here so the
# two sides cannot drift.

_HOUR_SET = r"\{([0-9, ]*)\}"
_STRATEGY_RE = re.compile(rf"^Charge: {_HOUR_SET}; Discharge: {_HOUR_SET}$")
_CONTEXT_RE = re.compile(
    r"Battery capacity (?P<cap>[0-9.]+) kWh, current charge (?P<soc>[0-9.]+) kWh, "
    r"max charge rate (?P<chg>[0-9.]+) kW, max discharge rate (?P<dis>[0-9.]+) kW\. "
    r"Electricity costs \$(?P<peak>[0-9.]+)/kWh during peak hours (?P<hours>[0-9, ]+) "
    r"and \$(?P<valley>[0-9.]+)/kWh otherwise\."
)


def _render_hours(hours: frozenset[int]) -> str:
    return "{" + ", ".join(str(h) for h in sorted(hours)) + "}"


def _parse_hours(text: str) -> frozenset[int]:
    text = text.strip()
    if not text:
        return frozenset()
    return frozenset(int(part) for part in text.split(","))


def render_strategy(strategy: Strategy) -> str:
    return (
        f"Charge: {_render_hours(strategy.charge_hours)}; "
        f"Discharge: {_render_hours(strategy.discharge_hours)}"
    )


def parse_strategy(text: str) -> Strategy:
    match = _STRATEGY_RE.match(text.strip())
    if match is None:
        raise RecordError(f"option text does not follow the strategy grammar: {text!r}")
    return Strategy(_parse_hours(match.group(1)), _parse_hours(match.group(2)))


def render_decision_context(spec: BatterySpec, prices: PriceSchedule) -> str:
    hours = ", ".join(str(h) for h in sorted(prices.peak_hours))
    return (
        f"Battery capacity {spec.capacity_kwh:g} kWh, "
        f"current charge {spec.initial_soc_kwh:g} kWh, "
        f"max charge rate {spec.max_charge_kw:g} kW, "
        f"max discharge rate {spec.max_discharge_kw:g} kW. "
        f"Electricity costs ${prices.price_peak:g}/kWh during peak hours {hours} "
        f"and ${prices.price_valley:g}/kWh otherwise."
    )


def parse_decision_context(text: str) -> tuple[BatterySpec, PriceSchedule]:
    match = _CONTEXT_RE.search(text)
    if match is None:
        raise RecordError("context does not contain a parseable battery description")
    spec = BatterySpec(
        capacity_kwh=float(match.group("cap")),
        initial_soc_kwh=float(match.group("soc")),
        max_charge_kw=float(match.group("chg")),
        max_discharge_kw=float(match.group("dis")),
    )
    prices = PriceSchedule(
        peak_hours=_parse_hours(match.group("hours")),
        price_peak=float(match.group("peak")),
        price_valley=float(match.group("valley")),
    )
    return spec, prices


# -- scenario files -----------------------------------------------------------
#
# A scenario record bundles everything one decision instance needs: battery
# spec, prices, the 48h history, the 24h actual load, and lettered options.
# Same JSON conventions as the dataset records.


@dataclass(frozen=True)
class Scenario:
    spec: BatterySpec
    prices: PriceSchedule
    history: TimeSeries
    actual_load: tuple[float, ...]
    options: tuple[tuple[str, Strategy], ...]


def scenario_to_record(scenario: Scenario) -> dict[str, Any]:
    return {
        "spec": {
            "capacity_kwh": scenario.spec.capacity_kwh,
            "initial_soc_kwh": scenario.spec.initial_soc_kwh,
            "max_charge_kw": scenario.spec.max_charge_kw,
            "max_discharge_kw": scenario.spec.max_discharge_kw,
        },
        "prices": {
            "peak_hours": sorted(scenario.prices.peak_hours),
            "price_peak": scenario.prices.price_peak,
            "price_valley": scenario.prices.price_valley,
        },
        "history": {
            "values": list(scenario.history.values),
            "start": scenario.history.start,
            "step": scenario.history.step,
            "unit": scenario.history.unit,
            "domain": scenario.history.domain,
        },
        "actual_load": list(scenario.actual_load),
        "options": [
            [letter, sorted(s.charge_hours), sorted(s.discharge_hours)]
            for letter, s in scenario.options
        ],
    }


def scenario_from_record(record: dict[str, Any]) -> Scenario:
    try:
        spec = BatterySpec(**record["spec"])
        prices = PriceSchedule(
            peak_hours=frozenset(record["prices"]["peak_hours"]),
            price_peak=record["prices"]["price_peak"],
            price_valley=record["prices"]["price_valley"],
        )
        history = TimeSeries(
            values=tuple(record["history"]["values"]),
            start=record["history"]["start"],
            step=record["history"]["step"],
            unit=record["history"].get("unit", ""),
            domain=record["history"].get("domain", ""),
        )
        options = tuple(
            (letter, Strategy(frozenset(charge), frozenset(discharge)))
            for letter, charge, discharge in record["options"]
        )
        return Scenario(
            spec=spec,
            prices=prices,
            history=history,
            actual_load=tuple(float(v) for v in record["actual_load"]),
            options=options,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"malformed scenario record: {exc}") from None


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_record(json.load(fh))


def save_scenario(path: str, scenario: Scenario) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_record(scenario), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
