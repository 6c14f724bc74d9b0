from .client import ServiceError, StorageClient
from .server import DEFAULT_MAX_BATCH, ServiceConfig, make_server, serve
from .store import InvalidMeasurement, Measurement, MeasurementStore, StorageError, check_home_id

__all__ = [
    "ServiceError", "StorageClient", "DEFAULT_MAX_BATCH", "ServiceConfig", "make_server", "serve",
    "InvalidMeasurement", "Measurement", "MeasurementStore", "StorageError", "check_home_id",
]
