"""Confusion counts and the per-appliance precision / accuracy / TPR / TNR / F1 table."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .traces import StateMask

OVERALL = "Overall"
METRIC_COLUMNS = ("precision", "accuracy", "tpr", "tnr", "f1")
METRIC_HEADERS = ("Prec.", "Acc.", "TPR", "TNR", "F1")
COUNT_COLUMNS = ("tp", "fp", "tn", "fn")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        for name in COUNT_COLUMNS:
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise EvaluationError(f"{name} must be a non-negative integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class MetricSet:
    precision: float
    accuracy: float
    tpr: float
    tnr: float
    f1: float
    # names of metrics whose ratio was 0/0 and reported as 0
    degenerate: frozenset[str] = frozenset()

    def as_dict(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in METRIC_COLUMNS}


def _ratio(num: int, den: int, name: str, degenerate: set) -> float:
    if den == 0:
        degenerate.add(name)
        return 0.0
    return num / den


def metrics(c: ConfusionCounts) -> MetricSet:
    if c.total == 0:
        raise EvaluationError("all confusion counts are zero")
    degenerate: set[str] = set()
    return MetricSet(
        precision=_ratio(c.tp, c.tp + c.fp, "precision", degenerate),
        accuracy=(c.tp + c.tn) / c.total,
        tpr=_ratio(c.tp, c.tp + c.fn, "tpr", degenerate),
        tnr=_ratio(c.tn, c.tn + c.fp, "tnr", degenerate),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1", degenerate),
        degenerate=frozenset(degenerate),
    )


def confusion(pred: StateMask, truth: StateMask) -> dict[str, ConfusionCounts]:
    """Counts per appliance name (truth order) plus the ``OVERALL`` sum."""
    if [a.name for a in pred.appliances] != [a.name for a in truth.appliances]:
        raise EvaluationError(
            f"appliances differ: {[a.name for a in pred.appliances]} vs {[a.name for a in truth.appliances]}")
    if pred.length != truth.length:
        raise EvaluationError(f"mask lengths differ: {pred.length} vs {truth.length}")
    out = {}
    for p, (appliance, t) in zip(pred.states.values(), truth.states.items()):
        name = appliance.name
        tp = int(np.count_nonzero(p & t))
        fp = int(np.count_nonzero(p & ~t))
        fn = int(np.count_nonzero(~p & t))
        out[name] = ConfusionCounts(tp, fp, len(t) - tp - fp - fn, fn)
    return with_overall(out)


def with_overall(counts: Mapping[str, ConfusionCounts]) -> dict[str, ConfusionCounts]:
    """Check per-appliance totals agree and add (or verify) the ``OVERALL`` row."""
    rows = {k: v for k, v in counts.items() if k != OVERALL}
    totals = {name: c.total for name, c in rows.items()}
    if len(set(totals.values())) > 1:
        raise EvaluationError(f"per-appliance sample totals differ: {totals}")
    if not rows:
        if OVERALL not in counts:
            raise EvaluationError("no counts given")
        return {OVERALL: counts[OVERALL]}
    overall = ConfusionCounts(0, 0, 0, 0)
    for c in rows.values():
        overall = overall + c
    if OVERALL in counts and counts[OVERALL] != overall:
        raise EvaluationError(f"{OVERALL} row {counts[OVERALL]} is not the sum of the appliance rows {overall}")
    return {**rows, OVERALL: overall}


def metric_table(counts: Mapping[str, ConfusionCounts]) -> dict[str, MetricSet]:
    return {name: metrics(c) for name, c in with_overall(counts).items()}


def format_metric_table(table: Mapping[str, MetricSet], digits: int = 3) -> str:
    width = max([len(n) for n in table] + [9])
    lines = [f"{'':<{width}}" + "".join(f"{h:>8}" for h in METRIC_HEADERS)]
    for name, m in table.items():
        lines.append(f"{name:<{width}}" + "".join(f"{getattr(m, c):>8.{digits}f}" for c in METRIC_COLUMNS))
    return "\n".join(lines) + "\n"


def metric_table_json(table: Mapping[str, MetricSet], counts: Mapping[str, ConfusionCounts] | None = None) -> str:
    rows = []
    for name, m in table.items():
        row = {"name": name, **m.as_dict(), "degenerate": sorted(m.degenerate)}
        if counts is not None and name in counts:
            row.update({c: getattr(counts[name], c) for c in COUNT_COLUMNS})
        rows.append(row)
    return json.dumps({"columns": list(METRIC_COLUMNS), "rows": rows}, indent=2, sort_keys=True) + "\n"


def format_counts_csv(counts: Mapping[str, ConfusionCounts]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("name",) + COUNT_COLUMNS)
    for name, c in counts.items():
        writer.writerow((name, c.tp, c.fp, c.tn, c.fn))
    return buf.getvalue()


def parse_counts_csv(text: str) -> dict[str, ConfusionCounts]:
    """Read ``name,tp,fp,tn,fn`` rows (header required, column order free)."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"name", *COUNT_COLUMNS} - set(reader.fieldnames or ())
    if missing:
        raise EvaluationError(f"counts file lacks columns: {sorted(missing)}")
    out = {}
    for row in reader:
        name = row["name"].strip()
        if name in out:
            raise EvaluationError(f"duplicate counts row {name!r}")
        try:
            out[name] = ConfusionCounts(*(int(row[c]) for c in COUNT_COLUMNS))
        except ValueError as exc:
            raise EvaluationError(f"row {name!r}: {exc}") from exc
    return out
