"""Fill sentence templates from a behavior model.

``group_by`` selects what one output line describes:

* ``usage``: one line per usage; slots ``user home appliance type start stop day``
* ``appliance``: one line per appliance with usages, in order of first use;
  slots ``user home appliance type count items``
* ``day``: one line per calendar day; slots ``user home day count items``

In the grouped modes ``item`` is formatted once per usage (slots
``appliance type start stop``) and the pieces are joined with
``separator``, except that the last two are joined with ``last_separator``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .behavior import BehaviorModel, Usage

NO_ACTIVITY = "No appliance usage detected."

_SENTENCE_SLOTS = {
    "usage": {"user", "home", "appliance", "type", "start", "stop", "day"},
    "appliance": {"user", "home", "appliance", "type", "count", "items"},
    "day": {"user", "home", "day", "count", "items"},
}
_ITEM_SLOTS = {"appliance", "type", "start", "stop"}


class TemplateError(ValueError):
    pass


def _slots(pattern: str) -> list[str]:
    try:
        return [name for _, name, _, _ in string.Formatter().parse(pattern) if name is not None]
    except ValueError as exc:
        raise TemplateError(f"malformed pattern {pattern!r}: {exc}") from exc


@dataclass(frozen=True)
class ReportTemplate:
    sentence: str = "{user} was using the {appliance} from {start} to {stop}."
    group_by: str = "usage"
    item: str = ""
    separator: str = ", "
    last_separator: str = " and "
    empty: str = NO_ACTIVITY

    def __post_init__(self) -> None:
        if self.group_by not in _SENTENCE_SLOTS:
            raise TemplateError(f"group_by must be one of {sorted(_SENTENCE_SLOTS)}, got {self.group_by!r}")
        self._check(self.sentence, _SENTENCE_SLOTS[self.group_by])
        if self.group_by != "usage":
            if not self.item:
                raise TemplateError(f"group_by={self.group_by} needs an item pattern")
            self._check(self.item, _ITEM_SLOTS)

    @staticmethod
    def _check(pattern: str, allowed: set[str]) -> None:
        for slot in _slots(pattern):
            if slot not in allowed:
                raise TemplateError(f"unresolvable slot {{{slot}}} in {pattern!r}")

    @classmethod
    def from_dict(cls, raw: Mapping) -> ReportTemplate:
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise TemplateError(f"unknown template keys: {sorted(unknown)}")
        return cls(**raw)


def builtin_templates() -> dict[str, ReportTemplate]:
    text = resources.files(__package__).joinpath("templates.yaml").read_text(encoding="utf-8")
    return {name: ReportTemplate.from_dict(raw) for name, raw in yaml.safe_load(text).items()}


def load_template(name_or_path: str | Path) -> ReportTemplate:
    """A built-in template by name, or the single template in a YAML file."""
    builtins = builtin_templates()
    if str(name_or_path) in builtins:
        return builtins[str(name_or_path)]
    path = Path(name_or_path)
    if not path.is_file():
        raise TemplateError(f"no built-in template or file named {str(name_or_path)!r}; "
                            f"built-ins: {', '.join(sorted(builtins))}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, Mapping):
        raise TemplateError(f"{path}: expected a mapping")
    return ReportTemplate.from_dict(raw)


def clock(t: datetime, start: datetime | None = None) -> str:
    """HH:MM, truncated; midnight ending a usage that began the day before reads 24:00."""
    if start is not None and t.time() == datetime.min.time() and t.date() == start.date() + timedelta(days=1):
        return "24:00"
    return f"{t.hour:02d}:{t.minute:02d}"


def _usage_slots(model: BehaviorModel, u: Usage) -> dict[str, str]:
    return {
        "appliance": u.appliance,
        "type": model.appliance(u.appliance).type,
        "start": clock(u.start),
        "stop": clock(u.stop, u.start),
        "day": u.start.date().isoformat(),
    }


def _join(parts: list[str], template: ReportTemplate) -> str:
    if len(parts) <= 1:
        return "".join(parts)
    return template.separator.join(parts[:-1]) + template.last_separator + parts[-1]


def render_lines(model: BehaviorModel, template: ReportTemplate | None = None) -> list[str]:
    template = template or ReportTemplate()
    if not model.usages:
        return [template.empty]
    base = {"user": model.user.name, "home": model.home.id}
    if template.group_by == "usage":
        return [template.sentence.format(**base, **_usage_slots(model, u)) for u in model.usages]

    groups: dict[str, list[Usage]] = {}
    for u in model.usages:
        key = u.appliance if template.group_by == "appliance" else u.start.date().isoformat()
        groups.setdefault(key, []).append(u)
    lines = []
    for key, members in groups.items():
        items = [template.item.format(**{k: v for k, v in _usage_slots(model, u).items() if k != "day"})
                 for u in members]
        slots = {**base, "count": str(len(members)), "items": _join(items, template)}
        if template.group_by == "appliance":
            slots.update(appliance=key, type=model.appliance(key).type)
        else:
            slots["day"] = key
        lines.append(template.sentence.format(**slots))
    return lines


def render_report(model: BehaviorModel, template: ReportTemplate | None = None) -> str:
    """Plain text, one sentence per line."""
    return "\n".join(render_lines(model, template)) + "\n"
