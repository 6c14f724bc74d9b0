"""The behavior object graph: one user, one home, appliances and usages.

A usage is the dependency edge from the user (client) to the appliance
(supplier), annotated with its start and stop time.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping

from ..traces import ApplianceId
from ..usage import UsageInterval


class BehaviorModelError(ValueError):
    pass


def _check_text(kind: str, value: str) -> None:
    if not isinstance(value, str) or not value.strip() or any(ord(c) < 32 for c in value):
        raise BehaviorModelError(f"invalid {kind}: {value!r}")


@dataclass(frozen=True)
class User:
    name: str

    def __post_init__(self) -> None:
        _check_text("user name", self.name)


@dataclass(frozen=True)
class Home:
    id: str

    def __post_init__(self) -> None:
        _check_text("home id", self.id)


@dataclass(frozen=True)
class Appliance:
    name: str
    type: str = ""

    def __post_init__(self) -> None:
        _check_text("appliance name", self.name)
        if any(ord(c) < 32 for c in self.type):
            raise BehaviorModelError(f"invalid appliance type: {self.type!r}")


@dataclass(frozen=True)
class Usage:
    user: str
    appliance: str
    start: datetime
    stop: datetime

    def __post_init__(self) -> None:
        if self.start.tzinfo is not None or self.stop.tzinfo is not None:
            raise BehaviorModelError("usage times are naive local times")
        if self.start.microsecond or self.stop.microsecond:
            raise BehaviorModelError("usage times have whole-second resolution")
        if not self.start < self.stop:
            raise BehaviorModelError(f"usage of {self.appliance} must start before it stops")

    @property
    def sort_key(self) -> tuple[datetime, str]:
        return self.start, self.appliance


@dataclass(frozen=True)
class BehaviorModel:
    user: User
    home: Home
    appliances: tuple[Appliance, ...]
    usages: tuple[Usage, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "appliances", tuple(self.appliances))
        object.__setattr__(self, "usages", tuple(self.usages))
        names = [a.name for a in self.appliances]
        if len(set(names)) != len(names):
            raise BehaviorModelError("appliance names must be unique")
        known = set(names)
        for usage in self.usages:
            if usage.appliance not in known:
                raise BehaviorModelError(f"usage references undeclared appliance {usage.appliance!r}")
            if usage.user != self.user.name:
                raise BehaviorModelError(f"usage by {usage.user!r} in the model of {self.user.name!r}")
        keys = [u.sort_key for u in self.usages]
        if keys != sorted(keys):
            raise BehaviorModelError("usages must be sorted by (start, appliance)")

    def appliance(self, name: str) -> Appliance:
        for a in self.appliances:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def edges(self) -> list[tuple[str, str]]:
        """(client, supplier) pairs, one per usage."""
        return [(u.user, u.appliance) for u in self.usages]


def build_model(user_name: str, usages: Iterable[UsageInterval],
                catalog: Iterable[ApplianceId] | Mapping[str, str], home_id: str = "home") -> BehaviorModel:
    """Model of ``usages``; appliances come from ``catalog`` sorted by name."""
    if isinstance(catalog, Mapping):
        appliances = [Appliance(name, tag) for name, tag in catalog.items()]
    else:
        appliances = [Appliance(a.name, a.type_tag) for a in catalog]
    appliances.sort(key=lambda a: a.name)
    known = {a.name for a in appliances}
    edges = []
    for u in usages:
        if u.appliance.name not in known:
            raise BehaviorModelError(f"usage references unknown appliance {u.appliance.name!r}")
        edges.append(Usage(user_name, u.appliance.name, u.start_time, u.stop_time))
    edges.sort(key=lambda u: (u.sort_key, u.stop))
    return BehaviorModel(User(user_name), Home(home_id), tuple(appliances), tuple(edges))
