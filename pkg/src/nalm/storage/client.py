"""Minimal client for the measurement service."""

from __future__ import annotations

import json
from datetime import date
from urllib.error import HTTPError
from urllib.parse import quote, urlencode
from urllib.request import Request, urlopen

import numpy as np

from ..ingest import RawSampleFile, day_start
from ..traces import DAY_SECONDS


class ServiceError(RuntimeError):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(f"HTTP {status}: {message}")
        self.status = status


class StorageClient:
    def __init__(self, base_url: str, timeout: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, method: str, path: str, body=None):
        data = None if body is None else json.dumps(body).encode()
        request = Request(self.base_url + path, data=data, method=method,
                          headers={"Content-Type": "application/json"})
        try:
            with urlopen(request, timeout=self.timeout) as response:
                return json.loads(response.read())
        except HTTPError as exc:
            try:
                message = json.loads(exc.read()).get("error", exc.reason)
            except ValueError:
                message = exc.reason
            raise ServiceError(exc.code, message) from exc

    def post(self, home_id: str, measurements) -> int:
        """Store ``(t, w)`` pairs; returns the accepted count."""
        body = [{"t": int(t), "w": float(w)} for t, w in measurements]
        return self._request("POST", f"/homes/{quote(home_id, safe='')}/measurements", body)["accepted"]

    def query(self, home_id: str, start: int | None = None, stop: int | None = None) -> list[tuple[int, float]]:
        params = {k: v for k, v in (("from", start), ("to", stop)) if v is not None}
        suffix = f"?{urlencode(params)}" if params else ""
        rows = self._request("GET", f"/homes/{quote(home_id, safe='')}/measurements{suffix}")
        return [(row["t"], row["w"]) for row in rows]

    def homes(self) -> list[str]:
        return self._request("GET", "/homes")

    def fetch_day(self, home_id: str, day: date) -> RawSampleFile:
        """The home's measurements on ``day`` in the ingest representation."""
        start = day_start(day)
        rows = self.query(home_id, start, start + DAY_SECONDS)
        t = np.array([r[0] for r in rows], dtype=np.int64)
        w = np.array([r[1] for r in rows], dtype=np.float64)
        return RawSampleFile(f"{self.base_url}/homes/{home_id}", t, w, appliance=home_id)
