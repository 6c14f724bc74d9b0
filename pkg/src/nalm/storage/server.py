"""HTTP/1.1 JSON front end for :class:`MeasurementStore`.

    POST /homes/{id}/measurements        [{"t": 1700000000, "w": 42.5}, ...] -> {"accepted": n}
    GET  /homes/{id}/measurements?from=&to=   -> [{"t": ..., "w": ...}, ...] ascending by t
    GET  /homes                          -> ["a", "b", ...]

Errors: 400 malformed body or range, 404 unknown route, 411 missing length,
413 oversize batch, 500 storage failure.
"""

from __future__ import annotations

import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping
from urllib.parse import parse_qs, urlsplit

from .store import InvalidMeasurement, MeasurementStore, StorageError

log = logging.getLogger(__name__)

DEFAULT_MAX_BATCH = 10_000
# generous per-measurement allowance for the request body
_BYTES_PER_MEASUREMENT = 128
_MEASUREMENTS = re.compile(r"/homes/([^/]+)/measurements")


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: Path = Path("nalm-data")
    max_batch: int = DEFAULT_MAX_BATCH

    def __post_init__(self) -> None:
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if not 0 <= self.port < 65536:
            raise ValueError(f"port out of range: {self.port}")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **overrides) -> ServiceConfig:
        """``NALM_HOST``, ``NALM_PORT``, ``NALM_DATA_DIR``, ``NALM_MAX_BATCH``; explicit overrides win."""
        env = os.environ if env is None else env
        values = {}
        for key, name, cast in (("host", "NALM_HOST", str), ("port", "NALM_PORT", int),
                                ("data_dir", "NALM_DATA_DIR", Path), ("max_batch", "NALM_MAX_BATCH", int)):
            if name in env:
                values[key] = cast(env[name])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class _ClientError(Exception):
    def __init__(self, status: HTTPStatus, message: str) -> None:
        super().__init__(message)
        self.status = status


def _parse_batch(body: bytes, max_batch: int) -> list[tuple[int, float]]:
    try:
        items = json.loads(body)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _ClientError(HTTPStatus.BAD_REQUEST, f"body is not JSON: {exc}") from exc
    if not isinstance(items, list):
        raise _ClientError(HTTPStatus.BAD_REQUEST, "body must be a JSON array")
    if not items:
        raise _ClientError(HTTPStatus.BAD_REQUEST, "empty batch")
    if len(items) > max_batch:
        raise _ClientError(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, f"batch of {len(items)} exceeds {max_batch}")
    batch = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or set(item) != {"t", "w"}:
            raise _ClientError(HTTPStatus.BAD_REQUEST, f"item {i}: expected an object with keys t and w")
        batch.append((item["t"], item["w"]))
    return batch


def _int_param(query: dict[str, list[str]], name: str) -> int | None:
    if name not in query:
        return None
    try:
        return int(query[name][-1])
    except ValueError as exc:
        raise _ClientError(HTTPStatus.BAD_REQUEST, f"{name} must be an integer") from exc


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _Server

    def log_message(self, format: str, *args) -> None:
        log.debug("%s " + format, self.address_string(), *args)

    def _send(self, status: HTTPStatus, payload) -> None:
        body = json.dumps(payload, separators=(",", ":")).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, action) -> None:
        try:
            self._send(HTTPStatus.OK, action())
        except _ClientError as exc:
            self._send(exc.status, {"error": str(exc)})
        except InvalidMeasurement as exc:
            self._send(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
        except StorageError as exc:
            log.error("storage failure: %s", exc)
            self._send(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": "storage failure"})

    def do_GET(self) -> None:
        url = urlsplit(self.path)
        if url.path == "/homes":
            return self._dispatch(self.server.store.homes)
        match = _MEASUREMENTS.fullmatch(url.path)
        if not match:
            return self._send(HTTPStatus.NOT_FOUND, {"error": f"no route {url.path}"})

        def query():
            params = parse_qs(url.query)
            t, w = self.server.store.query(match.group(1), _int_param(params, "from"), _int_param(params, "to"))
            return [{"t": ti, "w": wi} for ti, wi in zip(t.tolist(), w.tolist())]

        self._dispatch(query)

    def do_POST(self) -> None:
        match = _MEASUREMENTS.fullmatch(urlsplit(self.path).path)
        if not match:
            return self._send(HTTPStatus.NOT_FOUND, {"error": f"no route {self.path}"})
        length = self.headers.get("Content-Length")
        if length is None:
            self.close_connection = True
            return self._send(HTTPStatus.LENGTH_REQUIRED, {"error": "Content-Length required"})
        try:
            length = int(length)
        except ValueError:
            self.close_connection = True
            return self._send(HTTPStatus.BAD_REQUEST, {"error": "bad Content-Length"})
        max_batch = self.server.config.max_batch
        if length > max_batch * _BYTES_PER_MEASUREMENT + 1024:
            self.close_connection = True
            return self._send(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": "request body too large"})
        body = self.rfile.read(length)

        def store():
            batch = _parse_batch(body, max_batch)
            return {"accepted": self.server.store.store(match.group(1), batch)}

        self._dispatch(store)


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServiceConfig, store: MeasurementStore) -> None:
        super().__init__((config.host, config.port), _Handler)
        self.config = config
        self.store = store


def make_server(config: ServiceConfig) -> _Server:
    return _Server(config, MeasurementStore(config.data_dir))


def serve(config: ServiceConfig) -> None:
    """Run until interrupted. Prints the bound address once listening."""
    server = make_server(config)
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        server.store.close()
