import re
from datetime import date, datetime

import numpy as np
import pytest

from model_factory import random_model
from nalm.report import (NO_ACTIVITY, Appliance, BehaviorModel, BehaviorModelError, Home, ReportTemplate,
                         TemplateError, Usage, User, build_model, builtin_templates, clock, deserialize_model,
                         load_template, render_lines, render_report, serialize_model)
from nalm.traces import DAY_SECONDS, ApplianceId
from nalm.usage import UsageInterval

DAY = date(2024, 3, 5)
TV = ApplianceId("TV-CRT", "tv")
LAMP = ApplianceId("Lamp", "lamp")
CATALOG = [TV, LAMP]


def hm(h, m):
    return h * 3600 + m * 60


def rune_model():
    return build_model("Rune", [UsageInterval(DAY, hm(9, 50), hm(11, 45), TV)], CATALOG)


def test_build_empty():
    model = build_model("Rune", [], CATALOG)
    assert model.usages == ()
    assert [a.name for a in model.appliances] == ["Lamp", "TV-CRT"]


def test_build_single_edge():
    model = rune_model()
    assert model.edges == [("Rune", "TV-CRT")]
    assert model.usages[0].start == datetime(2024, 3, 5, 9, 50)


def test_build_sorts_usages(rng):
    intervals = []
    for _ in range(50):
        start = int(rng.integers(0, DAY_SECONDS - 1))
        intervals.append(UsageInterval(DAY, start, start + 1, CATALOG[rng.integers(2)]))
    model = build_model("Rune", intervals, CATALOG)
    oracle = sorted(((u.start, u.appliance.name) for u in intervals))
    assert [(u.start.hour * 3600 + u.start.minute * 60 + u.start.second, u.appliance) for u in model.usages] == oracle


def test_build_unknown_appliance():
    with pytest.raises(BehaviorModelError, match="Toaster"):
        build_model("Rune", [UsageInterval(DAY, 0, 10, ApplianceId("Toaster"))], CATALOG)


def test_model_invariants():
    t0, t1 = datetime(2024, 3, 5, 8), datetime(2024, 3, 5, 9)
    with pytest.raises(BehaviorModelError):
        BehaviorModel(User("R"), Home("h"), (Appliance("A"),), (Usage("R", "B", t0, t1),))
    with pytest.raises(BehaviorModelError):
        BehaviorModel(User("R"), Home("h"), (Appliance("A"),), (Usage("S", "A", t0, t1),))
    with pytest.raises(BehaviorModelError):
        BehaviorModel(User("R"), Home("h"), (Appliance("A"),), (Usage("R", "A", t1, t0),))
    with pytest.raises(BehaviorModelError, match="sorted"):
        BehaviorModel(User("R"), Home("h"), (Appliance("A"),),
                      (Usage("R", "A", t1, t1.replace(hour=10)), Usage("R", "A", t0, t1)))


def test_report_line():
    assert render_report(rune_model()) == "Rune was using the TV-CRT from 09:50 to 11:45.\n"


def test_report_empty():
    assert render_report(build_model("Rune", [], CATALOG)) == NO_ACTIVITY + "\n"


def test_report_three_usages_chronological():
    intervals = [UsageInterval(DAY, hm(18, 0), hm(20, 0), LAMP), UsageInterval(DAY, hm(7, 5), hm(7, 30), TV),
                 UsageInterval(DAY, hm(12, 0) + 59, hm(12, 30) + 59, TV)]
    lines = render_lines(build_model("Ann", intervals, CATALOG))
    expected = [f"Ann was using the {u.appliance.name} from {u.start // 3600:02d}:{u.start % 3600 // 60:02d} "
                f"to {u.stop // 3600:02d}:{u.stop % 3600 // 60:02d}."
                for u in sorted(intervals, key=lambda u: u.start)]
    assert lines == expected


def test_midnight_stop():
    model = build_model("Rune", [UsageInterval(DAY, hm(22, 0), DAY_SECONDS, TV)], CATALOG)
    assert render_report(model) == "Rune was using the TV-CRT from 22:00 to 24:00.\n"
    assert clock(datetime(2024, 3, 5, 0, 0)) == "00:00"


def test_grouped_templates():
    intervals = [UsageInterval(DAY, hm(7, 0), hm(7, 30), TV), UsageInterval(DAY, hm(9, 0), hm(9, 10), LAMP),
                 UsageInterval(DAY, hm(19, 0), hm(20, 0), TV), UsageInterval(DAY, hm(21, 0), hm(22, 0), TV)]
    model = build_model("Rune", intervals, CATALOG)
    templates = builtin_templates()
    assert render_lines(model, templates["by-appliance"]) == [
        "Rune was using the TV-CRT from 07:00 to 07:30, from 19:00 to 20:00 and from 21:00 to 22:00.",
        "Rune was using the Lamp from 09:00 to 09:10.",
    ]
    assert render_lines(model, templates["daily-summary"]) == [
        "On 2024-03-05, Rune used the TV-CRT from 07:00 to 07:30, the Lamp from 09:00 to 09:10, "
        "the TV-CRT from 19:00 to 20:00 and the TV-CRT from 21:00 to 22:00."
    ]


def test_template_errors():
    with pytest.raises(TemplateError, match="{where}"):
        ReportTemplate("{user} was at {where}.")
    with pytest.raises(TemplateError, match="{items}"):
        ReportTemplate("{user} used {items}.")
    with pytest.raises(TemplateError, match="item pattern"):
        ReportTemplate("{user} used {items}.", group_by="day")
    with pytest.raises(TemplateError):
        ReportTemplate("{user", group_by="usage")
    with pytest.raises(TemplateError, match="group_by"):
        ReportTemplate(group_by="week")


def test_load_template_from_file(tmp_path):
    path = tmp_path / "t.yaml"
    path.write_text("sentence: '{user}: {appliance} {start}-{stop}'\n")
    assert render_report(rune_model(), load_template(path)) == "Rune: TV-CRT 09:50-11:45\n"
    with pytest.raises(TemplateError, match="built-ins"):
        load_template("nope")


def test_no_invented_tokens(rng):
    for _ in range(20):
        model = random_model(rng)
        text = render_report(model)
        if not model.usages:
            assert text == NO_ACTIVITY + "\n"
            continue
        names = {a.name for a in model.appliances}
        times = {clock(u.start) for u in model.usages} | {clock(u.stop, u.start) for u in model.usages}
        for line in text.splitlines():
            m = re.fullmatch(r"(.*) was using the (.*) from (\d\d:\d\d) to (\d\d:\d\d)\.", line)
            assert m and m.group(1) == model.user.name
            assert m.group(2) in names and {m.group(3), m.group(4)} <= times


def test_serialize_empty():
    doc = serialize_model(build_model("Rune", [], CATALOG)).decode()
    assert '<user name="Rune" />' in doc
    assert "<usage " not in doc


def test_serialize_fixed_point():
    data = serialize_model(rune_model())
    assert serialize_model(deserialize_model(data)) == data
    assert b'start="2024-03-05T09:50:00"' in data


def test_random_round_trip(rng):
    for _ in range(50):
        model = random_model(rng)
        back = deserialize_model(serialize_model(model))
        assert back == model
        assert render_report(back) == render_report(model)


@pytest.mark.parametrize("doc, message", [
    (b"<nope/>", "root"),
    (b"<behavior-model format-version='2'/>", "format-version"),
    (b"<behavior-model format-version='1'><user name='a'/></behavior-model>", "home"),
    (b"<behavior-model", "well-formed"),
])
def test_deserialize_errors(doc, message):
    with pytest.raises(BehaviorModelError, match=message):
        deserialize_model(doc)
