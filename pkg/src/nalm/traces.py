"""Core time-series types, virtual smart-meter aggregation and threshold labeling."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

DAY_SECONDS = 86400
AGGREGATE = "AGGREGATE"

DEFAULT_ON_THRESHOLD = 5.0
DEFAULT_MIN_ON = 30


class TraceError(ValueError):
    """Structural problem with a trace or a set of traces."""


@dataclass(frozen=True, slots=True)
class Timestamp:
    """A second within a calendar day."""

    day: date
    seconds: int

    def __post_init__(self) -> None:
        if not 0 <= self.seconds < DAY_SECONDS:
            raise TraceError(f"seconds out of day range: {self.seconds}")

    def to_datetime(self) -> datetime:
        return datetime.combine(self.day, datetime.min.time()) + timedelta(seconds=self.seconds)


@dataclass(frozen=True, slots=True, order=True)
class ApplianceId:
    name: str
    type_tag: str = ""

    def __post_init__(self) -> None:
        if not self.name or any(c.isspace() or c in ",;=" for c in self.name):
            raise TraceError(f"invalid appliance name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Average power in watts at exactly 1 Hz, starting at midnight of ``day``.

    ``origin`` is the appliance the trace was measured on, or ``AGGREGATE``
    for a virtual smart-meter signal.
    """

    day: date
    samples: np.ndarray
    origin: ApplianceId | str = AGGREGATE
    partial: bool = False

    def __post_init__(self) -> None:
        samples = _frozen_array(self.samples, np.float64)
        if samples.ndim != 1:
            raise TraceError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise TraceError(f"{self.origin}: non-finite sample")
        if np.any(samples < 0):
            raise TraceError(f"{self.origin}: negative sample at index {int(np.argmax(samples < 0))}")
        if len(samples) > DAY_SECONDS:
            raise TraceError(f"{self.origin}: {len(samples)} samples exceed one day")
        if len(samples) != DAY_SECONDS and not self.partial:
            raise TraceError(
                f"{self.origin}: {len(samples)} samples; a full day has {DAY_SECONDS} (flag partial=True otherwise)"
            )
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerTrace):
            return NotImplemented
        return (
            self.day == other.day
            and self.origin == other.origin
            and self.partial == other.partial
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class TraceSet:
    """Per-appliance traces of one day."""

    day: date
    traces: Mapping[ApplianceId, PowerTrace]

    def __post_init__(self) -> None:
        traces = dict(sorted(self.traces.items()))
        names = [a.name for a in traces]
        if len(set(names)) != len(names):
            raise TraceError("appliance names must be unique within a trace set")
        common = Counter(len(t) for t in traces.values()).most_common(1)
        for appliance, trace in traces.items():
            if trace.day != self.day:
                raise TraceError(f"{appliance}: trace is for {trace.day}, set is for {self.day}")
            if len(trace) != common[0][0]:
                raise TraceError(f"{appliance}: length {len(trace)} differs from the other traces ({common[0][0]})")
        object.__setattr__(self, "traces", traces)

    @property
    def appliances(self) -> list[ApplianceId]:
        return list(self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceSet):
            return NotImplemented
        return self.day == other.day and list(self.traces) == list(other.traces) and all(
            self.traces[a] == other.traces[a] for a in self.traces
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class StateMask:
    """Per-appliance, per-second ON/OFF states."""

    day: date
    states: Mapping[ApplianceId, np.ndarray]

    def __post_init__(self) -> None:
        states = {a: _frozen_array(v, bool) for a, v in sorted(self.states.items())}
        lengths = {len(v) for v in states.values()}
        if len(lengths) > 1:
            raise TraceError(f"mask rows differ in length: {sorted(lengths)}")
        for appliance, row in states.items():
            if row.ndim != 1:
                raise TraceError(f"{appliance}: mask row must be one-dimensional")
        object.__setattr__(self, "states", states)

    @property
    def appliances(self) -> list[ApplianceId]:
        return list(self.states)

    @property
    def length(self) -> int:
        return len(next(iter(self.states.values()))) if self.states else 0

    def row(self, name: str) -> np.ndarray:
        for appliance, values in self.states.items():
            if appliance.name == name:
                return values
        raise KeyError(name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateMask):
            return NotImplemented
        return self.day == other.day and list(self.states) == list(other.states) and all(
            np.array_equal(self.states[a], other.states[a]) for a in self.states
        )

    __hash__ = None  # type: ignore[assignment]


def aggregate(traces: TraceSet) -> PowerTrace:
    """Sum the appliance traces second by second into one virtual meter trace."""
    if not traces.traces:
        raise TraceError("cannot aggregate an empty trace set")
    items = list(traces.traces.items())
    n = len(items[0][1])
    total = np.zeros(n)
    for appliance, trace in items:
        if len(trace) != n:
            raise TraceError(f"{appliance}: length {len(trace)} != {n}")
        total += trace.samples
    partial = any(t.partial for _, t in items) or n != DAY_SECONDS
    return PowerTrace(traces.day, total, AGGREGATE, partial=partial)


def on_runs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start (inclusive) and stop (exclusive) indices of the True runs of a boolean row."""
    padded = np.concatenate(([False], np.asarray(values, bool), [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return edges[0::2], edges[1::2]


def threshold_label(trace: PowerTrace | np.ndarray, on_threshold: float = DEFAULT_ON_THRESHOLD,
                    min_on: int = DEFAULT_MIN_ON) -> np.ndarray:
    """ON where power exceeds ``on_threshold`` for at least ``min_on`` consecutive seconds."""
    if on_threshold <= 0:
        raise ValueError("on_threshold must be positive")
    if min_on < 1:
        raise ValueError("min_on must be at least 1")
    samples = trace.samples if isinstance(trace, PowerTrace) else np.asarray(trace, float)
    above = samples > on_threshold
    starts, stops = on_runs(above)
    out = np.zeros(len(samples), bool)
    for a, b in zip(starts, stops):
        if b - a >= min_on:
            out[a:b] = True
    return out


@dataclass(frozen=True)
class LabelRule:
    on_threshold: float = DEFAULT_ON_THRESHOLD
    min_on: int = DEFAULT_MIN_ON


@dataclass(frozen=True)
class LabelConfig:
    """Labeling thresholds, overridable per appliance type tag."""

    default: LabelRule = LabelRule()
    by_type: Mapping[str, LabelRule] = field(default_factory=dict)

    def rule_for(self, appliance: ApplianceId) -> LabelRule:
        rule = self.by_type.get(appliance.type_tag)
        if rule is None:
            if self.by_type:
                log.info("no label rule for type %r of %s; using default", appliance.type_tag, appliance)
            return self.default
        return rule

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> LabelConfig:
        raw = dict(raw or {})
        default = LabelRule(**raw.get("default", {}))
        by_type = {k: LabelRule(**{**vars(default), **v}) for k, v in raw.get("by_type", {}).items()}
        return cls(default, by_type)


def label_set(traces: TraceSet, config: LabelConfig | None = None) -> StateMask:
    config = config or LabelConfig()
    states = {}
    for appliance, trace in traces.traces.items():
        rule = config.rule_for(appliance)
        states[appliance] = threshold_label(trace, rule.on_threshold, rule.min_on)
    return StateMask(traces.day, states)


def as_trace_set(day: date, traces: Iterable[PowerTrace]) -> TraceSet:
    mapping = {}
    for trace in traces:
        if not isinstance(trace.origin, ApplianceId):
            raise TraceError("trace set members need an appliance origin")
        mapping[trace.origin] = trace
    return TraceSet(day, mapping)
