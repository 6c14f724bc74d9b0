"""Pipeline configuration, loaded from YAML and validated before any stage runs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

import yaml

from .disaggregation import TrainConfig
from .ingest import IngestConfig, expand_paths
from .report.render import ReportTemplate, TemplateError, load_template
from .traces import LabelConfig
from .usage import DebounceConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DaySource:
    """Appliance files of one day; paths are resolved against the config file."""

    day: date
    files: tuple[Path, ...] = ()


@dataclass(frozen=True)
class ServiceSource:
    url: str
    home: str


@dataclass(frozen=True)
class PipelineConfig:
    train: DaySource
    test: DaySource
    service: ServiceSource | None = None
    user: str = "User"
    home: str = "home"
    training: TrainConfig = field(default_factory=TrainConfig)
    labels: LabelConfig = field(default_factory=LabelConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    debounce: DebounceConfig = field(default_factory=DebounceConfig)
    template: str = "usage"

    def __post_init__(self) -> None:
        if not self.test.files and self.service is None:
            raise ConfigError("the test day needs appliance files or a service source")
        if self.test.day == self.train.day:
            raise ConfigError("training and test day must differ")
        if not self.train.files:
            raise ConfigError("no training files")
        self.report_template()

    def report_template(self) -> ReportTemplate:
        try:
            return load_template(self.template)
        except TemplateError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, seed: int | None = None, service: ServiceSource | None = None) -> PipelineConfig:
        out = self
        if seed is not None:
            out = replace(out, training=replace(out.training, seed=seed))
        if service is not None:
            out = replace(out, service=service)
        return out


_KEYS = {"seed", "user", "home", "train", "test", "service", "training", "labels", "ingest", "debounce", "template"}


def _day_source(raw: Any, base: Path, what: str) -> DaySource:
    if not isinstance(raw, Mapping) or "day" not in raw:
        raise ConfigError(f"{what}: expected a mapping with 'day' and 'files'")
    try:
        day = raw["day"] if isinstance(raw["day"], date) else date.fromisoformat(str(raw["day"]))
    except ValueError as exc:
        raise ConfigError(f"{what}.day: {exc}") from exc
    files = raw.get("files", [])
    if isinstance(files, str):
        files = [files]
    return DaySource(day, tuple(expand_paths(base / entry for entry in files)))


def pipeline_config_from_dict(raw: Mapping[str, Any], base: Path = Path(".")) -> PipelineConfig:
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        training = dict(raw.get("training") or {})
        if "seed" in raw:
            training["seed"] = raw["seed"]
        service = raw.get("service")
        return PipelineConfig(
            train=_day_source(raw.get("train"), base, "train"),
            test=_day_source(raw.get("test"), base, "test"),
            service=ServiceSource(str(service["url"]), str(service["home"])) if service else None,
            user=str(raw.get("user", "User")),
            home=str(raw.get("home", "home")),
            training=TrainConfig.from_dict(training),
            labels=LabelConfig.from_dict(raw.get("labels")),
            ingest=IngestConfig.from_dict(raw.get("ingest")),
            debounce=DebounceConfig.from_dict(raw.get("debounce")),
            template=str(raw.get("template", "usage")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return pipeline_config_from_dict(raw, path.parent)


def load_section(path: str | Path | None, section: str) -> Mapping[str, Any]:
    """One top-level section of a config file, for the single-stage commands."""
    if path is None:
        return {}
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    value = raw.get(section) or {}
    if section == "training" and "seed" in raw:
        value = {**value, "seed": raw["seed"]}
    return value
