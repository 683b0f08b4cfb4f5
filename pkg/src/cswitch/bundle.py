"""Deterministic on-disk container for solved models.

A bundle is a single file: an 8-byte magic tag with format version, a
little-endian uint64 header length, a canonical JSON header (sorted keys,
no whitespace), and the raw C-order float64 array payloads back to back.
The header stores the run configuration and an array manifest, nothing
else; in particular no timestamps, so identical inputs always produce
byte-identical files and solved bundles can be compared with a plain
checksum.
"""

from __future__ import annotations

import json
import struct

import numpy as np

__all__ = ["save_bundle", "load_bundle", "BundleError"]

MAGIC = b"CSWB0001"


class BundleError(Exception):
    """Raised for malformed or incompatible bundle files."""


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def save_bundle(path, config: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write the configuration and named float64 arrays to `path`."""
    manifest = []
    offset = 0
    payloads = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    header = _canonical_json({"config": config, "arrays": manifest})
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for chunk in payloads:
            f.write(chunk)


def load_bundle(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a bundle back as (config, arrays)."""
    try:
        f = open(path, "rb")
    except OSError as e:
        raise BundleError(f"cannot read bundle {path}: {e}") from e
    with f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise BundleError(f"{path}: not a solve bundle (bad magic {magic!r})")
        raw_len = f.read(8)
        if len(raw_len) != 8:
            raise BundleError(f"{path}: truncated bundle header")
        (hlen,) = struct.unpack("<Q", raw_len)
        try:
            header = json.loads(f.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise BundleError(f"{path}: corrupt bundle header: {e}") from None
        data = f.read()
    arrays = {}
    try:
        manifest = header["arrays"]
        config = header["config"]
    except (TypeError, KeyError):
        raise BundleError(f"{path}: bundle header missing config or manifest") from None
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(data):
            raise BundleError(f"{path}: array {entry['name']} truncated")
        arrays[entry["name"]] = np.frombuffer(data[start:end], dtype=np.float64).reshape(shape)
    return config, arrays
