"""Parse appliance trace files and put them on the uniform 1 Hz day grid.

Two line grammars are accepted, mixed freely within a file:

* ``DD/MM/YYYY HH:MM:SS;<watts>[;ignored...]`` (plug-meter exports)
* ``<epoch_seconds>,<watts>`` (synthetic data, UTC)

Wall-clock timestamps are taken as naive local time and mapped onto the same
integer second axis as epoch seconds, so a day always starts at a multiple of
86400.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .traces import DAY_SECONDS, ApplianceId, PowerTrace, TraceError, TraceSet

log = logging.getLogger(__name__)

DEFAULT_GAP_FILL = 10
MAX_MALFORMED_FRACTION = 0.10

_EPOCH_DAY = date(1970, 1, 1).toordinal()
_WALL = re.compile(r"(\d{2})/(\d{2})/(\d{4}) (\d{2}):(\d{2}):(\d{2});([^;]*)(?:;.*)?")
_EPOCH = re.compile(r"(-?\d+),([^,]*)")


class ParseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RawSampleFile:
    """Parsed rows of one file, sorted by time with duplicate timestamps collapsed (last wins)."""

    source: str
    timestamps: np.ndarray  # int64 seconds on the epoch axis
    watts: np.ndarray
    malformed: tuple[int, ...] = ()
    appliance: str | None = None

    @property
    def name(self) -> str:
        return self.appliance or Path(self.source).stem

    def rows(self) -> list[tuple[datetime, float]]:
        return [(to_datetime(int(t)), float(w)) for t, w in zip(self.timestamps, self.watts)]

    def __len__(self) -> int:
        return len(self.timestamps)


def to_datetime(seconds: int) -> datetime:
    return datetime(1970, 1, 1) + timedelta(seconds=seconds)


def day_start(day: date) -> int:
    return (day.toordinal() - _EPOCH_DAY) * DAY_SECONDS


def _parse_line(line: str, ordinals: dict) -> tuple[int, float] | None:
    m = _WALL.fullmatch(line)
    if m:
        dd, mm, yyyy, hh, mi, ss, watts = m.groups()
        key = (yyyy, mm, dd)
        if key not in ordinals:
            try:
                ordinals[key] = date(int(yyyy), int(mm), int(dd)).toordinal() - _EPOCH_DAY
            except ValueError:
                ordinals[key] = None
        ordinal = ordinals[key]
        h, mi_, s = int(hh), int(mi), int(ss)
        if ordinal is None or h > 23 or mi_ > 59 or s > 59:
            return None
        t = ordinal * DAY_SECONDS + h * 3600 + mi_ * 60 + s
    else:
        m = _EPOCH.fullmatch(line)
        if not m:
            return None
        t, watts = int(m.group(1)), m.group(2)
    try:
        w = float(watts)
    except ValueError:
        return None
    if not math.isfinite(w) or w < 0:
        return None
    return t, w


def parse_trace_file(data: bytes | str, source: str = "<memory>", appliance: str | None = None,
                     max_malformed: float = MAX_MALFORMED_FRACTION) -> RawSampleFile:
    """Parse UTF-8 text (LF or CRLF); blank lines are skipped.

    Raises ParseError listing line numbers when more than ``max_malformed``
    of the non-blank lines cannot be parsed.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    text = text.lstrip("﻿")
    times, watts, bad = [], [], []
    ordinals: dict = {}
    total = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        total += 1
        parsed = _parse_line(line, ordinals)
        if parsed is None:
            bad.append(lineno)
        else:
            times.append(parsed[0])
            watts.append(parsed[1])
    if total and len(bad) > max_malformed * total:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise ParseError(f"{source}: {len(bad)} of {total} lines malformed (lines {shown})")
    if bad:
        log.warning("%s: skipped %d malformed lines", source, len(bad))
    t = np.asarray(times, dtype=np.int64)
    w = np.asarray(watts, dtype=np.float64)
    order = np.lexsort((np.arange(len(t)), t))
    t, w = t[order], w[order]
    last = np.ones(len(t), dtype=bool)
    last[:-1] = t[1:] != t[:-1]
    return RawSampleFile(source, t[last], w[last], tuple(bad), appliance)


def read_trace_file(path: str | Path, appliance: str | None = None) -> RawSampleFile:
    path = Path(path)
    return parse_trace_file(path.read_bytes(), str(path), appliance)


def expand_paths(paths: Iterable[str | Path]) -> list[Path]:
    """Directories stand for the regular files they contain, in name order."""
    out = []
    for path in map(Path, paths):
        out.extend(sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path])
    return out


def format_trace_file(raw: RawSampleFile) -> str:
    """Serialize rows in the wall-clock grammar; parsing the result gives the same rows."""
    lines = [f"{to_datetime(int(t)):%d/%m/%Y %H:%M:%S};{float(w)!r}" for t, w in zip(raw.timestamps, raw.watts)]
    return "".join(line + "\n" for line in lines)


def resample_to_1hz(raw: RawSampleFile, gap_fill: int = DEFAULT_GAP_FILL, day: date | None = None,
                    origin: ApplianceId | str | None = None) -> PowerTrace:
    """One value per second of ``day`` (default: the day of the first sample).

    Each sample holds for up to ``gap_fill`` seconds after it; seconds not
    reached that way are 0 W. The trace is flagged partial when the recording
    starts more than ``gap_fill`` seconds after midnight or stops more than
    ``gap_fill`` seconds before the end of the day.
    """
    if gap_fill < 0:
        raise ValueError("gap_fill must be >= 0")
    if len(raw) == 0:
        raise ParseError(f"{raw.source}: no samples")
    if day is None:
        day = to_datetime(int(raw.timestamps[0])).date()
    start = day_start(day)
    rel = raw.timestamps - start
    inside = (rel >= 0) & (rel < DAY_SECONDS)
    if not inside.any():
        raise TraceError(f"{raw.source}: no samples on {day}")
    seconds = np.arange(DAY_SECONDS)
    idx = np.searchsorted(rel, seconds, side="right") - 1
    held = (idx >= 0) & (seconds - rel[np.maximum(idx, 0)] <= gap_fill)
    samples = np.where(held, raw.watts[np.maximum(idx, 0)], 0.0)
    first, last = rel[inside][0], rel[inside][-1]
    partial = bool(first > gap_fill or last < DAY_SECONDS - 1 - gap_fill)
    return PowerTrace(day, samples, origin if origin is not None else raw.name, partial=partial)


@dataclass(frozen=True)
class IngestConfig:
    gap_fill: int = DEFAULT_GAP_FILL
    # expected appliance name -> type tag; empty means "whatever files are given"
    appliances: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> IngestConfig:
        raw = dict(raw or {})
        return cls(gap_fill=int(raw.get("gap_fill", DEFAULT_GAP_FILL)), appliances=dict(raw.get("appliances", {})))


def build_day(files: Iterable[RawSampleFile], day: date, config: IngestConfig | None = None) -> TraceSet:
    """Assemble a full-day TraceSet with one trace per appliance file."""
    config = config or IngestConfig()
    traces = {}
    for raw in files:
        name = raw.name
        if any(a.name == name for a in traces):
            raise TraceError(f"two files for appliance {name}")
        rel = raw.timestamps - day_start(day)
        if not ((rel >= 0) & (rel < DAY_SECONDS)).any():
            raise TraceError(f"{raw.source}: no samples on {day}")
        if config.appliances and name not in config.appliances:
            log.warning("%s: appliance %s is not in the configured catalog", raw.source, name)
        appliance = ApplianceId(name, config.appliances.get(name, ""))
        traces[appliance] = resample_to_1hz(raw, config.gap_fill, day, appliance)
    missing = sorted(set(config.appliances) - {a.name for a in traces})
    if missing:
        raise TraceError(f"missing appliance files for {day}: {', '.join(missing)}")
    if not traces:
        raise TraceError("no appliance files given")
    return TraceSet(day, traces)
