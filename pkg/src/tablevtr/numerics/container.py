"""Named-parameter container files.

Layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON header,
then a little-endian f32 payload. The header holds a manifest of
``{name, dtype, shape, offset}`` entries (offsets relative to the payload
start) plus a free-form ``meta`` object.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"TBLPARM1"


class ContainerError(ValueError):
    pass


def save_params(path, params: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    manifest = []
    chunks = []
    offset = 0
    for name in sorted(params):
        # asarray, not ascontiguousarray: the latter turns 0-d into shape (1,)
        arr = np.asarray(params[name], dtype="<f4")
        buf = arr.tobytes(order="C")
        manifest.append({"name": name, "dtype": "f32", "shape": list(arr.shape), "offset": offset})
        chunks.append(buf)
        offset += len(buf)
    header = json.dumps({"manifest": manifest, "meta": dict(meta or {})}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in chunks:
            fh.write(buf)


def load_params(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ContainerError(f"{path}: not a parameter container")
    if len(raw) < 16:
        raise ContainerError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    payload = memoryview(raw)[16 + hlen :]
    params = {}
    for entry in header["manifest"]:
        if entry["dtype"] != "f32":
            raise ContainerError(f"unsupported dtype {entry['dtype']!r} for {entry['name']}")
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        if start + 4 * count > len(payload):
            raise ContainerError(f"{path}: payload truncated at {entry['name']}")
        arr = np.frombuffer(payload[start : start + 4 * count], dtype="<f4").reshape(entry["shape"])
        params[entry["name"]] = arr.astype(np.float32)
    return params, header.get("meta", {})
