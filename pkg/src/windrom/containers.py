"""Binary container family used by every serializable artifact.

Layout (all integers little-endian):

    bytes 0-3    magic b"WROM"
    bytes 4-7    container version, u32 (currently 1)
    bytes 8-23   kind tag, ascii right-padded with NUL
    bytes 24-31  header length H, u64
    H bytes      JSON header: {"meta": {...}, "arrays": [{"name", "dtype", "shape"}]}
    rest         array payloads in header order, C-contiguous little-endian

The JSON header is written with sorted keys and no whitespace so identical
inputs serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import WindromError

MAGIC = b"WROM"
VERSION = 1


class ContainerError(WindromError):
    """Raised for malformed or mismatched container files."""


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_container(path, kind, meta, arrays):
    """Write a container file.

    arrays is an ordered mapping name -> ndarray; arrays are stored
    little-endian in the order given.
    """
    kind_b = kind.encode("ascii")
    if len(kind_b) > 16:
        raise ContainerError(f"kind tag too long: {kind!r}")
    entries = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)})
        payloads.append(le.tobytes())
    header = canonical_json({"meta": meta, "arrays": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(kind_b.ljust(16, b"\0"))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for p in payloads:
            fh.write(p)


def read_container(path, expect_kind=None):
    """Read a container file; returns (kind, meta, arrays dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ContainerError(f"{path}: not a container file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    kind = blob[8:24].rstrip(b"\0").decode("ascii")
    if expect_kind is not None and kind != expect_kind:
        raise ContainerError(f"{path}: expected kind {expect_kind!r}, found {kind!r}")
    (hlen,) = struct.unpack_from("<Q", blob, 24)
    header = json.loads(blob[32 : 32 + hlen].decode("utf-8"))
    offset = 32 + hlen
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        raw = blob[offset : offset + nbytes]
        if len(raw) != nbytes:
            raise ContainerError(f"{path}: truncated payload for array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        offset += nbytes
    return kind, header["meta"], arrays


def array_hash(*arrays):
    """sha256 over shapes and little-endian bytes of the given arrays."""
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        h.update(str(arr.shape).encode())
        h.update(le.tobytes())
    return h.hexdigest()


def json_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
