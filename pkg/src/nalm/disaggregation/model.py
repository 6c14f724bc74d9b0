"""Train per-appliance ON/OFF classifiers on the aggregate signal and apply them."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Mapping, Union

import numpy as np

from .. import container
from ..traces import DAY_SECONDS, ApplianceId, PowerTrace, StateMask, TraceError
from .features import feature_dim, feature_matrix
from .forest import Forest, ForestParams, Tree, apply_bins, balanced_class_weight, bin_cuts, fit_forest
from .margin import LinearMargin, MarginParams, fit_margin

log = logging.getLogger(__name__)

MODEL_MAGIC = b"NALM-MODEL\n"
MODEL_VERSION = 1
_MARGIN_STREAM = 0x4D415247


class Backend(str, Enum):
    FOREST = "forest"
    MARGIN = "margin"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    window_w: int = 9
    backend: Backend = Backend.FOREST
    forest: ForestParams = field(default_factory=ForestParams)
    margin: MarginParams = field(default_factory=MarginParams)
    seed: int = 0
    balance_classes: bool = True

    def __post_init__(self) -> None:
        if self.window_w < 1 or self.window_w % 2 == 0:
            raise ValueError(f"window_w must be odd and >= 1, got {self.window_w}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "backend", Backend(self.backend))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["backend"] = self.backend.value
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any] | None) -> TrainConfig:
        raw = dict(raw or {})
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        if "forest" in raw:
            raw["forest"] = ForestParams(**raw["forest"])
        if "margin" in raw:
            raw["margin"] = MarginParams(**raw["margin"])
        return cls(**raw)


@dataclass(frozen=True)
class ConstantClassifier:
    state: bool

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(X), self.state)


Classifier = Union[Forest, LinearMargin, ConstantClassifier]


@dataclass(frozen=True, eq=False)
class DisaggregationModel:
    appliances: tuple[ApplianceId, ...]
    config: TrainConfig
    classifiers: Mapping[str, Classifier]
    version: int = MODEL_VERSION

    def classifier(self, appliance: ApplianceId) -> Classifier:
        return self.classifiers[appliance.name]


def train(aggregate: PowerTrace, labels: StateMask, config: TrainConfig | None = None,
          n_jobs: int = 1) -> DisaggregationModel:
    """Fit one binary classifier per appliance of ``labels``.

    The model depends only on the data and ``config`` (seed included), never
    on ``n_jobs``.
    """
    config = config or TrainConfig()
    if aggregate.partial:
        raise TraceError("training needs a full-day aggregate; got a partial trace")
    if not labels.states:
        raise ValueError("empty label set")
    if labels.length != len(aggregate):
        raise TraceError(f"aggregate has {len(aggregate)} samples, labels have {labels.length}")

    X = feature_matrix(aggregate, config.window_w)
    appliances = tuple(labels.appliances)
    classifiers: dict[str, Classifier] = {}
    learnable = []
    for appliance in appliances:
        y = labels.states[appliance]
        if y.all() or not y.any():
            log.warning("%s is %s in every training sample; using a constant predictor",
                        appliance, "ON" if y.all() else "OFF")
            classifiers[appliance.name] = ConstantClassifier(bool(y[0]))
        else:
            learnable.append(appliance)

    if learnable and config.backend is Backend.FOREST:
        cuts = bin_cuts(X, config.forest.max_bins)
        binned = (apply_bins(X, cuts), cuts)
        for appliance in learnable:
            y = labels.states[appliance]
            index = appliances.index(appliance)
            weight = balanced_class_weight(y) if config.balance_classes else (1.0, 1.0)
            classifiers[appliance.name] = fit_forest(
                None, y, config.forest, (config.seed, index), weight, n_jobs=n_jobs, binned=binned)
    elif learnable:
        Y = np.stack([labels.states[a] for a in learnable], axis=1)
        weight = None
        if config.balance_classes:
            weight = np.ones(Y.shape)
            for j in range(Y.shape[1]):
                w_off, w_on = balanced_class_weight(Y[:, j])
                weight[:, j] = np.where(Y[:, j], w_on, w_off)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, _MARGIN_STREAM]))
        fitted, _ = fit_margin(X, Y, config.margin, rng, center=config.window_w // 2, sample_weight=weight)
        classifiers.update({a.name: m for a, m in zip(learnable, fitted)})

    return DisaggregationModel(appliances, config, {a.name: classifiers[a.name] for a in appliances})


def predict(model: DisaggregationModel, aggregate: PowerTrace,
            appliances: list[ApplianceId] | None = None) -> StateMask:
    """Per-second ON/OFF state of every modelled appliance.

    ``appliances``, when given, must match the model's appliance list exactly.
    """
    if appliances is not None and sorted(appliances) != sorted(model.appliances):
        raise ModelError(
            f"model covers {[a.name for a in model.appliances]}, asked for {[a.name for a in appliances]}")
    if aggregate.partial or len(aggregate) != DAY_SECONDS:
        raise TraceError("prediction needs a full-day aggregate")
    X = feature_matrix(aggregate, model.config.window_w)
    return StateMask(aggregate.day, {a: model.classifier(a).predict(X) for a in model.appliances})


def _forest_arrays(prefix: str, forest: Forest) -> dict[str, np.ndarray]:
    offsets = np.cumsum([0] + [t.n_nodes for t in forest.trees]).astype(np.int64)
    out = {f"{prefix}/tree_offsets": offsets}
    for part in ("feature", "threshold", "left", "right", "value"):
        out[f"{prefix}/{part}"] = np.concatenate([getattr(t, part) for t in forest.trees])
    return out


def _forest_from(prefix: str, arrays: Mapping[str, np.ndarray]) -> Forest:
    offsets = arrays[f"{prefix}/tree_offsets"]
    parts = {p: arrays[f"{prefix}/{p}"] for p in ("feature", "threshold", "left", "right", "value")}
    if offsets[-1] != len(parts["feature"]) or any(len(v) != offsets[-1] for v in parts.values()):
        raise container.ContainerError(f"{prefix}: inconsistent tree arrays")
    trees = tuple(Tree(**{p: v[a:b] for p, v in parts.items()}) for a, b in zip(offsets[:-1], offsets[1:]))
    return Forest(trees)


def save_model(model: DisaggregationModel) -> bytes:
    kinds, arrays = {}, {}
    for appliance in model.appliances:
        clf = model.classifier(appliance)
        prefix = appliance.name
        if isinstance(clf, ConstantClassifier):
            kinds[prefix] = {"kind": "constant", "state": clf.state}
        elif isinstance(clf, Forest):
            kinds[prefix] = {"kind": "forest"}
            arrays.update(_forest_arrays(prefix, clf))
        else:
            kinds[prefix] = {"kind": "margin", "center": clf.center, "bias": clf.bias}
            for part in ("level_cuts", "mean", "scale", "weights"):
                arrays[f"{prefix}/{part}"] = getattr(clf, part)
    meta = {
        "config": model.config.to_dict(),
        "appliances": [[a.name, a.type_tag] for a in model.appliances],
        "classifiers": kinds,
        "feature_dim": feature_dim(model.config.window_w),
    }
    return container.pack(MODEL_MAGIC, model.version, meta, arrays)


def load_model(data: bytes) -> DisaggregationModel:
    meta, arrays = container.unpack(data, MODEL_MAGIC, MODEL_VERSION)
    try:
        config = TrainConfig.from_dict(meta["config"])
        appliances = tuple(ApplianceId(name, tag) for name, tag in meta["appliances"])
        classifiers: dict[str, Classifier] = {}
        for appliance in appliances:
            entry = meta["classifiers"][appliance.name]
            name = appliance.name
            if entry["kind"] == "constant":
                classifiers[name] = ConstantClassifier(bool(entry["state"]))
            elif entry["kind"] == "forest":
                classifiers[name] = _forest_from(name, arrays)
            elif entry["kind"] == "margin":
                classifiers[name] = LinearMargin(
                    center=int(entry["center"]), bias=float(entry["bias"]),
                    **{p: arrays[f"{name}/{p}"] for p in ("level_cuts", "mean", "scale", "weights")})
            else:
                raise container.ContainerError(f"unknown classifier kind {entry['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, container.ContainerError):
            raise
        raise container.ContainerError(f"malformed model: {exc}") from exc
    return DisaggregationModel(appliances, config, classifiers)
