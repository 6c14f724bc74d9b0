"""Load disaggregation: aggregate power in, per-appliance ON/OFF states out."""

from .features import extract_features, feature_dim, feature_matrix
from .forest import Forest, ForestParams
from .margin import LinearMargin, MarginParams
from .model import (Backend, ConstantClassifier, DisaggregationModel, ModelError, TrainConfig,
                    load_model, predict, save_model, train)

__all__ = [
    "Backend", "ConstantClassifier", "DisaggregationModel", "Forest", "ForestParams", "LinearMargin",
    "MarginParams", "ModelError", "TrainConfig", "extract_features", "feature_dim", "feature_matrix",
    "load_model", "predict", "save_model", "train",
]
