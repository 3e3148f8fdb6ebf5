"""Binary tensor container used for model files and dataset archives.

Layout (all integers little-endian):

    magic      4 bytes  b"MRTC"
    version    uint16
    header_len uint32
    header     UTF-8 JSON: {"meta": {...}, "tensors": [{name, shape, dtype}]}
    payload    raw C-order values, one tensor after the other, header order

The header JSON is serialized with sorted keys and no whitespace so that
identical content produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import CompatibilityError

MAGIC = b"MRTC"
VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8"}


def write_container(path: str | Path, meta: Mapping[str, Any], tensors: Mapping[str, np.ndarray]) -> None:
    """Write ``tensors`` plus a JSON ``meta`` block to ``path``.

    Tensor insertion order is preserved; meta must be JSON-serializable.
    """
    entries = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype == np.float64:
            code = "f8"
        elif arr.dtype == np.int64:
            code = "i8"
        else:
            raise CompatibilityError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code})
        blobs.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    header = json.dumps(
        {"meta": meta, "tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Read a container written by :func:`write_container`.

    Raises CompatibilityError on a bad magic, version mismatch, or a
    truncated payload.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CompatibilityError(f"{path}: not a tensor container")
    version, header_len = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise CompatibilityError(f"{path}: container version {version}, expected {VERSION}")
    header_end = 10 + header_len
    try:
        header = json.loads(raw[10:header_end].decode("utf-8"))
    except ValueError as exc:
        raise CompatibilityError(f"{path}: corrupt container header: {exc}") from exc
    tensors: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        end = offset + nbytes
        if end > len(raw):
            raise CompatibilityError(f"{path}: truncated payload for tensor {entry['name']!r}")
        arr = np.frombuffer(raw[offset:end], dtype=dtype).reshape(shape).copy()
        tensors[entry["name"]] = arr
        offset = end
    if offset != len(raw):
        raise CompatibilityError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    return header["meta"], tensors
