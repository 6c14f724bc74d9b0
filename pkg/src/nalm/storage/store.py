"""Durable per-home measurement logs.

Each home has one append-only file of fixed 16-byte records
(``int64`` epoch seconds, ``float64`` watts, little endian). A batch is
written with one ``write`` and fsynced before it becomes visible to queries.
Replay keeps the last record for every timestamp and ignores a torn record
at the end of the file.
"""

from __future__ import annotations

import logging
import math
import os
import re
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

RECORD = struct.Struct("<qd")
_RECORD_DTYPE = np.dtype([("t", "<i8"), ("w", "<f8")])
_HOME_ID = re.compile(r"[A-Za-z0-9_-][A-Za-z0-9_.-]{0,63}")
LOG_SUFFIX = ".log"


class StorageError(RuntimeError):
    """The write could not be made durable; nothing was acknowledged."""


class InvalidMeasurement(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    home_id: str
    t: int
    w: float

    def __post_init__(self) -> None:
        check_home_id(self.home_id)
        if isinstance(self.t, bool) or not isinstance(self.t, int):
            raise InvalidMeasurement(f"timestamp must be an integer, got {self.t!r}")
        if not -2**63 <= self.t < 2**63:
            raise InvalidMeasurement(f"timestamp out of range: {self.t}")
        if isinstance(self.w, bool) or not isinstance(self.w, (int, float)) or not math.isfinite(self.w) or self.w < 0:
            raise InvalidMeasurement(f"watts must be a finite non-negative number, got {self.w!r}")
        object.__setattr__(self, "w", float(self.w))


def check_home_id(home_id: str) -> str:
    if not isinstance(home_id, str) or not _HOME_ID.fullmatch(home_id):
        raise InvalidMeasurement(f"invalid home id {home_id!r}: use 1-64 of [A-Za-z0-9_.-], not starting with '.'")
    return home_id


class _HomeLog:
    def __init__(self, path: Path) -> None:
        self.path = path
        self.lock = threading.Lock()
        self.values: dict[int, float] = {}
        self._sorted: tuple[np.ndarray, np.ndarray] | None = None
        self._replay()
        self.fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)

    def _replay(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        whole = len(data) - len(data) % RECORD.size
        if whole != len(data):
            log.warning("%s: dropping %d bytes of a torn record", self.path, len(data) - whole)
            os.truncate(self.path, whole)
        records = np.frombuffer(data[:whole], dtype=_RECORD_DTYPE)
        self.values = dict(zip(records["t"].tolist(), records["w"].tolist()))

    def append(self, batch: list[tuple[int, float]]) -> None:
        payload = b"".join(RECORD.pack(t, w) for t, w in batch)
        with self.lock:
            size = os.fstat(self.fd).st_size
            try:
                written = os.write(self.fd, payload)
                if written != len(payload):
                    raise OSError(f"short write ({written} of {len(payload)} bytes)")
                os.fsync(self.fd)
            except OSError as exc:
                try:
                    os.ftruncate(self.fd, size)
                except OSError:
                    log.exception("%s: could not roll back a failed append", self.path)
                raise StorageError(f"{self.path}: {exc}") from exc
            self.values.update(batch)
            self._sorted = None

    def snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        with self.lock:
            if self._sorted is None:
                t = np.fromiter(self.values.keys(), dtype=np.int64, count=len(self.values))
                w = np.fromiter(self.values.values(), dtype=np.float64, count=len(self.values))
                order = np.argsort(t, kind="stable")
                self._sorted = (t[order], w[order])
            return self._sorted

    def close(self) -> None:
        os.close(self.fd)


class MeasurementStore:
    """Thread-safe; appends to one home are serialized, homes are independent."""

    def __init__(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._homes: dict[str, _HomeLog] = {}
        for path in sorted(self.data_dir.glob(f"*{LOG_SUFFIX}")):
            home_id = path.name[:-len(LOG_SUFFIX)]
            if _HOME_ID.fullmatch(home_id):
                self._homes[home_id] = _HomeLog(path)

    def _home(self, home_id: str, create: bool) -> _HomeLog | None:
        with self._lock:
            home = self._homes.get(home_id)
            if home is None and create:
                home = self._homes[home_id] = _HomeLog(self.data_dir / f"{home_id}{LOG_SUFFIX}")
            return home

    def store(self, home_id: str, batch: Iterable[tuple[int, float]]) -> int:
        """Append a batch durably; returns the number of accepted measurements."""
        check_home_id(home_id)
        rows = [(m.t, m.w) for m in (Measurement(home_id, t, w) for t, w in batch)]
        if not rows:
            raise InvalidMeasurement("empty batch")
        self._home(home_id, create=True).append(rows)
        return len(rows)

    def query(self, home_id: str, start: int | None = None, stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Timestamps and watts with ``start <= t < stop``, ascending."""
        check_home_id(home_id)
        if start is not None and stop is not None and start > stop:
            raise InvalidMeasurement(f"from ({start}) is after to ({stop})")
        home = self._home(home_id, create=False)
        if home is None:
            return np.empty(0, np.int64), np.empty(0)
        t, w = home.snapshot()
        lo = 0 if start is None else np.searchsorted(t, start, side="left")
        hi = len(t) if stop is None else np.searchsorted(t, stop, side="left")
        return t[lo:hi], w[lo:hi]

    def homes(self) -> list[str]:
        with self._lock:
            homes = list(self._homes.items())
        return sorted(h for h, log_ in homes if log_.values)

    def close(self) -> None:
        with self._lock:
            for home in self._homes.values():
                home.close()
            self._homes.clear()
