"""Parameter archive files: JSON manifest header + raw little-endian payload.

Layout: magic, uint64 LE header length, UTF-8 JSON header (a list of
{name, shape, dtype, byte_offset} entries, offsets relative to the payload),
then the concatenated array bytes.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"NSPKARCH1\n"

_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


def save_archive(path, arrays) -> None:
    """arrays: iterable of (name, np.ndarray); order is preserved."""
    entries = []
    payload = bytearray()
    for name, arr in arrays:
        key = str(arr.dtype)
        if key not in _DTYPES:
            raise ValueError(f"unsupported dtype {key} for {name}")
        raw = np.ascontiguousarray(arr).astype(_DTYPES[key], copy=False).tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": key, "byte_offset": len(payload)}
        )
        payload.extend(raw)
    header = json.dumps(entries).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(bytes(payload))


def load_archive(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a parameter archive")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        entries = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    out: dict[str, np.ndarray] = {}
    for e in entries:
        dt = np.dtype(_DTYPES[e["dtype"]])
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start = e["byte_offset"]
        arr = np.frombuffer(payload, dtype=dt, count=count, offset=start)
        out[e["name"]] = arr.reshape(e["shape"]).astype(e["dtype"], copy=True)
    return out
