"""Tabular series ingestion and river edge-list loading."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone


@dataclass(frozen=True)
class IngestSchema:
    """Column mapping for a delimiter-separated file with a header row."""

    timestamp_col: str
    value_cols: tuple[str, ...]
    unit: str = ""
    domain: str = ""
    delimiter: str = ","

    def __post_init__(self) -> None:
        object.__setattr__(self, "value_cols", tuple(self.value_cols))
        if not self.value_cols:
            raise ValueError("at least one value column required")


@dataclass(frozen=True)
class IngestReport:
    rows_read: int
    rows_dropped: int
    series_count: int


def _parse_timestamp(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def ingest_series(path: str, schema: IngestSchema):
    """Parse one file into one TimeSeries per value column.

    Rows with non-finite values in any value column are dropped and counted.
    The step is the most common gap between kept rows.
    """
    from ..core import TimeSeries

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=schema.delimiter)
        header = reader.fieldnames or []
        for col in (schema.timestamp_col, *schema.value_cols):
            if col not in header:
                raise ValueError(f"unknown column {col!r}; file has {header}")
        times: list[int] = []
        columns: dict[str, list[float]] = {c: [] for c in schema.value_cols}
        rows_read = 0
        rows_dropped = 0
        for row in reader:
            rows_read += 1
            try:
                parsed = {c: float(row[c]) for c in schema.value_cols}
            except (TypeError, ValueError):
                rows_dropped += 1
                continue
            if any(not math.isfinite(v) for v in parsed.values()):
                rows_dropped += 1
                continue
            times.append(_parse_timestamp(row[schema.timestamp_col]))
            for c, v in parsed.items():
                columns[c].append(v)

    if not times:
        raise ValueError(f"no usable rows in {path}")
    for earlier, later in zip(times, times[1:]):
        if later <= earlier:
            raise ValueError(f"timestamp disorder: {later} follows {earlier}")
    if len(times) > 1:
        gaps = Counter(b - a for a, b in zip(times, times[1:]))
        step = gaps.most_common(1)[0][0]
    else:
        step = 1

    series = [
        TimeSeries(
            values=tuple(columns[c]),
            start=times[0],
            step=step,
            unit=schema.unit,
            domain=schema.domain,
        )
        for c in schema.value_cols
    ]
    report = IngestReport(
        rows_read=rows_read, rows_dropped=rows_dropped, series_count=len(series)
    )
    return series, report


def load_edge_list(path: str) -> list[tuple[str, str]]:
    """"src,dst" per line; blank lines and #-comments skipped."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"malformed edge at line {lineno}: {line!r}")
            edges.append((parts[0], parts[1]))
    return edges
