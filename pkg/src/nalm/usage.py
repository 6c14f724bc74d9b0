"""Turn per-second ON/OFF masks into usage intervals."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping

import numpy as np

from .traces import ApplianceId, StateMask, Timestamp, TraceError, on_runs

DEFAULT_MIN_GAP = 60
DEFAULT_MIN_LEN = 120


@dataclass(frozen=True, order=True)
class UsageInterval:
    """Half-open ``[start, stop)`` in seconds of ``day``; ``stop`` may equal the day length."""

    day: date
    start: int
    stop: int
    appliance: ApplianceId

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.stop:
            raise TraceError(f"{self.appliance}: bad interval [{self.start}, {self.stop})")

    @property
    def first_on(self) -> Timestamp:
        return Timestamp(self.day, self.start)

    @property
    def start_time(self) -> datetime:
        return datetime.combine(self.day, datetime.min.time()) + timedelta(seconds=self.start)

    @property
    def stop_time(self) -> datetime:
        return datetime.combine(self.day, datetime.min.time()) + timedelta(seconds=self.stop)

    @property
    def duration(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class DebounceConfig:
    min_gap: int = DEFAULT_MIN_GAP
    min_len: int = DEFAULT_MIN_LEN

    def __post_init__(self) -> None:
        if self.min_gap < 0 or self.min_len < 0:
            raise ValueError("min_gap and min_len must be >= 0")

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> DebounceConfig:
        return cls(**dict(raw or {}))


def debounce(row: np.ndarray, min_gap: int = DEFAULT_MIN_GAP, min_len: int = DEFAULT_MIN_LEN) -> np.ndarray:
    """Fill interior OFF gaps shorter than ``min_gap``, then drop ON runs shorter than ``min_len``."""
    if min_gap < 0 or min_len < 0:
        raise ValueError("min_gap and min_len must be >= 0")
    out = np.array(row, dtype=bool)
    starts, stops = on_runs(out)
    # OFF gaps between consecutive ON runs
    for gap_start, gap_stop in zip(stops[:-1], starts[1:]):
        if gap_stop - gap_start < min_gap:
            out[gap_start:gap_stop] = True
    starts, stops = on_runs(out)
    for a, b in zip(starts, stops):
        if b - a < min_len:
            out[a:b] = False
    return out


def extract_usages(mask: StateMask, config: DebounceConfig | None = None) -> list[UsageInterval]:
    """One interval per maximal ON run of each debounced row, ordered by appliance then start."""
    config = config or DebounceConfig()
    out = []
    for appliance, row in mask.states.items():
        starts, stops = on_runs(debounce(row, config.min_gap, config.min_len))
        out.extend(UsageInterval(mask.day, int(a), int(b), appliance) for a, b in zip(starts, stops))
    return out


def paint(intervals: Iterable[UsageInterval], length: int) -> np.ndarray:
    row = np.zeros(length, dtype=bool)
    for interval in intervals:
        row[interval.start:interval.stop] = True
    return row


def format_usages(intervals: Iterable[UsageInterval]) -> str:
    """Newline-delimited ``appliance,start_iso,stop_iso`` records."""
    return "".join(
        f"{u.appliance.name},{u.start_time.isoformat()},{u.stop_time.isoformat()}\n" for u in intervals)


def parse_usages(text: str, catalog: Mapping[str, ApplianceId] | None = None) -> list[UsageInterval]:
    """Inverse of :func:`format_usages`; ``catalog`` restores type tags by name."""
    catalog = catalog or {}
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            name, start, stop = line.strip().split(",")
            t0, t1 = datetime.fromisoformat(start), datetime.fromisoformat(stop)
        except ValueError as exc:
            raise ValueError(f"usage line {lineno}: {exc}") from exc
        midnight = datetime.combine(t0.date(), datetime.min.time())
        appliance = catalog.get(name) or ApplianceId(name)
        out.append(UsageInterval(t0.date(), int((t0 - midnight).total_seconds()),
                                 int((t1 - midnight).total_seconds()), appliance))
    return out
