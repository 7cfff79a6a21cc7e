"""Versioned single-file engine snapshot.

Layout: an 8-byte magic, a length-prefixed canonical JSON header, then raw
little-endian array payloads in the order the header's manifest declares.
Everything the engine needs is inside (graph, embeddings, signatures,
encodings, projection model, index, config hash), and serialization is
deterministic: the same engine state always produces identical bytes.
Writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import SnapshotCorruptError

MAGIC = b"FGSNAP01"

_DTYPES = {"float64": "<f8", "int64": "<i8"}


def pack(header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    """Serialize a header dict plus named arrays into one snapshot blob."""
    manifest = []
    payload = bytearray()
    for name, arr in arrays.items():
        if arr.dtype == np.float64:
            dtype = "float64"
        elif arr.dtype == np.int64:
            dtype = "int64"
        else:
            raise ValueError(f"unsupported array dtype {arr.dtype} for {name!r}")
        manifest.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        payload.extend(np.ascontiguousarray(arr).astype(_DTYPES[dtype]).tobytes())
    header = dict(header)
    header["manifest"] = manifest
    header_bytes = json.dumps(header, ensure_ascii=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + bytes(payload)


def unpack(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise SnapshotCorruptError("bad magic; not a fusegraph snapshot")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if offset + header_len > len(blob):
        raise SnapshotCorruptError("truncated snapshot header")
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotCorruptError(f"unreadable snapshot header: {exc}") from None
    offset += header_len
    arrays: dict[str, np.ndarray] = {}
    for spec in header.get("manifest", []):
        dtype = _DTYPES.get(spec["dtype"])
        if dtype is None:
            raise SnapshotCorruptError(f"unknown dtype {spec['dtype']!r}")
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise SnapshotCorruptError(f"truncated payload for array {spec['name']!r}")
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(shape)
        arrays[spec["name"]] = arr.copy()  # detach from the input buffer
        offset += nbytes
    if offset != len(blob):
        raise SnapshotCorruptError("trailing bytes after declared payload")
    return header, arrays


def write_file(path: str, blob: bytes) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_file(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise SnapshotCorruptError(f"snapshot file not found: {path}") from None
    return unpack(blob)
