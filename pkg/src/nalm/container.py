"""Versioned binary container for named numpy arrays plus JSON metadata.

Layout::

    magic line            e.g. b"NALM-MODEL\\n"
    version               uint16, little endian
    header length         uint32, little endian
    header                UTF-8 JSON: {"meta": ..., "arrays": [{name, dtype, shape, offset, nbytes}]}
    payload               raw array bytes, in header order
    crc32                 uint32 over everything before it

Output bytes are a pure function of the inputs.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Any, Mapping

import numpy as np


class ContainerError(ValueError):
    """Payload is corrupt, truncated or not a container of the expected kind."""


class UnsupportedVersionError(ContainerError):
    pass


def _canonical_dtype(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == bool:
        return arr.astype("|u1")
    return arr.astype(arr.dtype.newbyteorder("<"), copy=False)


def pack(magic: bytes, version: int, meta: Mapping[str, Any], arrays: Mapping[str, np.ndarray]) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        kind = "bool" if arr.dtype == bool else _canonical_dtype(arr).dtype.str
        raw = _canonical_dtype(arr).tobytes()
        entries.append({"name": name, "dtype": kind, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")).encode()
    body = magic + struct.pack("<HI", version, len(header)) + header + b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def unpack(data: bytes, magic: bytes, supported: int) -> tuple[dict, dict[str, np.ndarray]]:
    data = bytes(data)
    if not data.startswith(magic):
        raise ContainerError(f"missing {magic.strip().decode()} header")
    fixed = len(magic) + 6
    if len(data) < fixed + 4:
        raise ContainerError("truncated payload")
    version, header_len = struct.unpack_from("<HI", data, len(magic))
    if version != supported:
        raise UnsupportedVersionError(f"unsupported format version {version} (expected {supported})")
    if len(data) < fixed + header_len + 4:
        raise ContainerError("truncated payload")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise ContainerError("checksum mismatch: payload corrupt or truncated")
    try:
        header = json.loads(data[fixed:fixed + header_len])
        payload = data[fixed + header_len:-4]
        arrays = {}
        for e in header["arrays"]:
            raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
            if len(raw) != e["nbytes"]:
                raise ContainerError(f"array {e['name']} extends past the payload")
            dtype = np.dtype("|u1") if e["dtype"] == "bool" else np.dtype(e["dtype"])
            arr = np.frombuffer(raw, dtype=dtype).reshape(e["shape"])
            arrays[e["name"]] = arr.astype(bool) if e["dtype"] == "bool" else arr.copy()
        return header["meta"], arrays
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ContainerError):
            raise
        raise ContainerError(f"malformed header: {exc}") from exc
