"""XML interchange document for behavior models.

Element order and attribute order are fixed, so equal models serialize to
identical bytes. See ``docs/interchange.md`` for the schema.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from datetime import datetime

from .behavior import Appliance, BehaviorModel, BehaviorModelError, Home, Usage, User

FORMAT_VERSION = "1"
ROOT = "behavior-model"


def serialize_model(model: BehaviorModel) -> bytes:
    root = ET.Element(ROOT, {"format-version": FORMAT_VERSION})
    ET.SubElement(root, "home", {"id": model.home.id})
    ET.SubElement(root, "user", {"name": model.user.name})
    appliances = ET.SubElement(root, "appliances")
    for a in model.appliances:
        ET.SubElement(appliances, "appliance", {"name": a.name, "type": a.type})
    usages = ET.SubElement(root, "usages")
    for u in model.usages:
        ET.SubElement(usages, "usage", {
            "user": u.user,
            "appliance": u.appliance,
            "start": u.start.isoformat(timespec="seconds"),
            "stop": u.stop.isoformat(timespec="seconds"),
        })
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def _one(root: ET.Element, tag: str) -> ET.Element:
    found = root.findall(tag)
    if len(found) != 1:
        raise BehaviorModelError(f"expected exactly one <{tag}>, found {len(found)}")
    return found[0]


def _attr(el: ET.Element, name: str) -> str:
    value = el.get(name)
    if value is None:
        raise BehaviorModelError(f"<{el.tag}> lacks attribute {name!r}")
    return value


def deserialize_model(data: bytes | str) -> BehaviorModel:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise BehaviorModelError(f"not well-formed: {exc}") from exc
    if root.tag != ROOT:
        raise BehaviorModelError(f"root element is <{root.tag}>, expected <{ROOT}>")
    if root.get("format-version") != FORMAT_VERSION:
        raise BehaviorModelError(f"unsupported format-version {root.get('format-version')!r}")
    home = Home(_attr(_one(root, "home"), "id"))
    user = User(_attr(_one(root, "user"), "name"))
    appliances = tuple(Appliance(_attr(el, "name"), el.get("type", ""))
                       for el in _one(root, "appliances").findall("appliance"))
    usages = []
    for el in _one(root, "usages").findall("usage"):
        try:
            start = datetime.fromisoformat(_attr(el, "start"))
            stop = datetime.fromisoformat(_attr(el, "stop"))
        except ValueError as exc:
            raise BehaviorModelError(f"bad usage time: {exc}") from exc
        usages.append(Usage(_attr(el, "user"), _attr(el, "appliance"), start, stop))
    return BehaviorModel(user, home, appliances, tuple(usages))
