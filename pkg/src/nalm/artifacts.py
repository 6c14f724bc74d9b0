"""File formats passed between pipeline stages.

* trace archive: binary container of one day's appliance traces
* aggregate: ``epoch_seconds,watts`` lines, one per second (also a valid ingest file)
* mask: JSON with the ON runs of every appliance as ``[start, stop)`` pairs
"""

from __future__ import annotations

import json
from datetime import date

import numpy as np

from . import container
from .ingest import day_start, parse_trace_file, resample_to_1hz
from .traces import AGGREGATE, DAY_SECONDS, ApplianceId, PowerTrace, StateMask, TraceError, TraceSet, on_runs

ARCHIVE_MAGIC = b"NALM-TRACES\n"
ARCHIVE_VERSION = 1
MASK_FORMAT = "nalm-mask"
MASK_VERSION = 1


def save_trace_archive(traces: TraceSet) -> bytes:
    meta = {
        "day": traces.day.isoformat(),
        "appliances": [[a.name, a.type_tag, t.partial] for a, t in traces.traces.items()],
    }
    arrays = {a.name: t.samples for a, t in traces.traces.items()}
    return container.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, meta, arrays)


def load_trace_archive(data: bytes) -> TraceSet:
    meta, arrays = container.unpack(data, ARCHIVE_MAGIC, ARCHIVE_VERSION)
    try:
        day = date.fromisoformat(meta["day"])
        traces = {}
        for name, tag, partial in meta["appliances"]:
            appliance = ApplianceId(name, tag)
            traces[appliance] = PowerTrace(day, arrays[name], appliance, partial=bool(partial))
    except (KeyError, TypeError, ValueError) as exc:
        raise container.ContainerError(f"malformed trace archive: {exc}") from exc
    return TraceSet(day, traces)


def format_aggregate(trace: PowerTrace) -> str:
    if trace.partial or len(trace) != DAY_SECONDS:
        raise TraceError("only full-day traces can be written as an aggregate file")
    start = day_start(trace.day)
    return "".join(f"{start + i},{w!r}\n" for i, w in enumerate(trace.samples.tolist()))


def parse_aggregate(data: bytes | str, source: str = "<aggregate>", day: date | None = None) -> PowerTrace:
    raw = parse_trace_file(data, source)
    trace = resample_to_1hz(raw, gap_fill=0, day=day, origin=AGGREGATE)
    if trace.partial:
        raise TraceError(f"{source}: aggregate does not cover the whole day")
    return trace


def save_mask(mask: StateMask) -> str:
    rows = []
    for appliance, row in mask.states.items():
        starts, stops = on_runs(row)
        rows.append({"name": appliance.name, "type": appliance.type_tag,
                     "on": [[int(a), int(b)] for a, b in zip(starts, stops)]})
    doc = {"format": MASK_FORMAT, "version": MASK_VERSION, "day": mask.day.isoformat(),
           "length": mask.length, "appliances": rows}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def load_mask(text: str | bytes) -> StateMask:
    try:
        doc = json.loads(text)
        if doc.get("format") != MASK_FORMAT or doc.get("version") != MASK_VERSION:
            raise ValueError(f"not a {MASK_FORMAT} v{MASK_VERSION} document")
        day = date.fromisoformat(doc["day"])
        length = int(doc["length"])
        states = {}
        for row in doc["appliances"]:
            values = np.zeros(length, dtype=bool)
            previous = 0
            for a, b in row["on"]:
                if not previous <= a < b <= length:
                    raise ValueError(f"{row['name']}: run [{a}, {b}) out of order or range")
                values[a:b] = True
                previous = b
            states[ApplianceId(row["name"], row.get("type", ""))] = values
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed mask file: {exc}") from exc
    return StateMask(day, states)
