"""Parameter checkpoint files.

Layout (all integers little-endian)::

    bytes 0..7    magic  b"MSHCKPT1"
    bytes 8..15   header length H (uint64)
    next H bytes  UTF-8 JSON header:
                    {"tensors": [{"name", "shape", "dtype", "offset", "nbytes"}, ...],
                     "meta": {...}}
    remainder     tensor payloads, row-major, little-endian, at the stated
                  offsets relative to the start of the payload section

``dtype`` is ``"<f8"`` or ``"<f4"``.  ``meta`` is free-form JSON used by the
model layer for config, word vocabulary and label identifiers.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MAGIC = b"MSHCKPT1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr)
        dt = a.dtype.newbyteorder("<")
        if dt.str not in ("<f8", "<f4"):
            raise CheckpointError(f"unsupported dtype {a.dtype} for {name!r}")
        raw = a.astype(dt, copy=False).tobytes(order="C")
        entries.append({"name": name, "shape": list(a.shape), "dtype": dt.str, "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": dict(meta or {})}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    base = 16 + hlen
    tensors = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        chunk = data[start : start + e["nbytes"]]
        if len(chunk) != e["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for {e['name']!r}")
        arr = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"])
        tensors[e["name"]] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return tensors, header.get("meta", {})
