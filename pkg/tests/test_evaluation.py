import csv
import json
from datetime import date

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DATA
from nalm.evaluation import (OVERALL, ConfusionCounts, EvaluationError, confusion, format_counts_csv,
                             format_metric_table, metric_table, metric_table_json, metrics, parse_counts_csv,
                             with_overall)
from nalm.traces import ApplianceId, StateMask

DAY = date(2024, 3, 5)


def mask(**rows):
    return StateMask(DAY, {ApplianceId(k): np.array(v, bool) for k, v in rows.items()})


def test_identical_masks():
    row = [1, 0, 0, 1, 1]
    counts = confusion(mask(A=row), mask(A=row))
    assert counts["A"] == ConfusionCounts(3, 0, 2, 0)


def test_all_on_vs_all_off():
    assert confusion(mask(A=[1] * 6), mask(A=[0] * 6))["A"] == ConfusionCounts(0, 6, 0, 0)


def test_counting_oracle(rng):
    pred = {f"A{i}": rng.random(500) < 0.3 for i in range(4)}
    truth = {f"A{i}": rng.random(500) < 0.4 for i in range(4)}
    counts = confusion(mask(**pred), mask(**truth))
    total = ConfusionCounts(0, 0, 0, 0)
    for name in pred:
        tp = fp = tn = fn = 0
        for p, t in zip(pred[name], truth[name]):
            tp += p and t
            fp += p and not t
            tn += not p and not t
            fn += not p and t
        assert counts[name] == ConfusionCounts(tp, fp, tn, fn)
        total = total + counts[name]
    assert counts[OVERALL] == total
    assert list(counts) == ["A0", "A1", "A2", "A3", OVERALL]


def test_shape_mismatch():
    with pytest.raises(EvaluationError):
        confusion(mask(A=[1, 0]), mask(A=[1, 0, 0]))
    with pytest.raises(EvaluationError):
        confusion(mask(A=[1, 0]), mask(B=[1, 0]))


def test_closed_forms():
    m = metrics(ConfusionCounts(tp=12048, fp=21, tn=72280, fn=2049))
    assert m.precision == pytest.approx(12048 / 12069, abs=1e-12)
    assert m.accuracy == pytest.approx(84328 / 86398, abs=1e-12)
    assert m.tpr == pytest.approx(12048 / 14097, abs=1e-12)
    assert m.tnr == pytest.approx(72280 / 72301, abs=1e-12)
    assert m.f1 == pytest.approx(24096 / 26166, abs=1e-12)
    assert m.degenerate == frozenset()


def test_perfect_counts():
    m = metrics(ConfusionCounts(10, 0, 10, 0))
    assert (m.precision, m.accuracy, m.tpr, m.tnr, m.f1) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_degenerate_ratios():
    m = metrics(ConfusionCounts(0, 0, 7, 0))
    assert m.precision == m.tpr == m.f1 == 0.0
    assert m.degenerate == {"precision", "tpr", "f1"}
    assert m.accuracy == m.tnr == 1.0
    with pytest.raises(EvaluationError):
        metrics(ConfusionCounts(0, 0, 0, 0))
    with pytest.raises(EvaluationError):
        ConfusionCounts(-1, 0, 0, 0)


@given(st.tuples(*[st.integers(0, 10**6)] * 4).filter(lambda c: sum(c) > 0), st.integers(1, 1000))
def test_scale_consistency(counts, k):
    a = metrics(ConfusionCounts(*counts))
    b = metrics(ConfusionCounts(*(k * c for c in counts)))
    for name in ("precision", "accuracy", "tpr", "tnr", "f1"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-12)
        assert 0.0 <= getattr(a, name) <= 1.0


def test_unequal_totals_rejected():
    with pytest.raises(EvaluationError, match="totals differ"):
        with_overall({"A": ConfusionCounts(1, 1, 1, 1), "B": ConfusionCounts(1, 1, 1, 2)})


def test_overall_row_verified():
    rows = {"A": ConfusionCounts(1, 1, 1, 1), "B": ConfusionCounts(2, 0, 1, 1)}
    assert with_overall(rows)[OVERALL] == ConfusionCounts(3, 1, 2, 2)
    with pytest.raises(EvaluationError, match="not the sum"):
        with_overall({**rows, OVERALL: ConfusionCounts(3, 1, 2, 3)})


def test_reference_counts_reproduce_reference_metrics():
    counts = parse_counts_csv((DATA / "reference_counts.csv").read_text())
    table = metric_table(counts)
    with open(DATA / "reference_metrics.csv") as fh:
        for row in csv.DictReader(fh):
            for column in ("precision", "accuracy", "tpr", "tnr", "f1"):
                assert getattr(table[row["name"]], column) == pytest.approx(float(row[column]), abs=1e-3)
    assert {c.total for name, c in counts.items() if name != OVERALL} == {86398}


def test_presentation():
    counts = parse_counts_csv((DATA / "reference_counts.csv").read_text())
    table = metric_table(counts)
    text = format_metric_table(table)
    assert text.splitlines()[0].split() == ["Prec.", "Acc.", "TPR", "TNR", "F1"]
    assert text.splitlines()[-1].split() == ["Overall", "0.780", "0.943", "0.787", "0.967", "0.783"]
    doc = json.loads(metric_table_json(table, counts))
    assert doc["rows"][0]["name"] == "TV-CRT" and doc["rows"][0]["tp"] == 12048
    assert parse_counts_csv(format_counts_csv(counts)) == counts


def test_counts_csv_errors():
    with pytest.raises(EvaluationError, match="lacks columns"):
        parse_counts_csv("name,tp,fp\nA,1,2\n")
    with pytest.raises(EvaluationError, match="duplicate"):
        parse_counts_csv("name,tp,fp,tn,fn\nA,1,2,3,4\nA,1,2,3,4\n")
