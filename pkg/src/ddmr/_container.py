"""Binary array container with a plain-text manifest.

Layout: magic, 8-byte little-endian manifest length, UTF-8 JSON manifest,
then the raw array payload.  The manifest carries the format version, a
user metadata block, and an array directory with shapes, dtypes, offsets and
per-array SHA-256 checksums.  Arrays are stored little-endian, C-order, and
writes are byte-deterministic (sorted keys, no timestamps).
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

MAGIC = b"DDMRBOX1"
FORMAT_VERSION = 1


class ContainerError(IOError):
    pass


def write_container(path, metadata: dict, arrays: dict) -> None:
    directory = {}
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        directory[name] = {
            "dtype": le.dtype.str,
            "shape": list(arr.shape),
            "offset": len(payload),
            "nbytes": len(raw),
            "sha256": hashlib.sha256(raw).hexdigest(),
        }
        payload.extend(raw)
    manifest = json.dumps(
        {"format_version": FORMAT_VERSION, "metadata": metadata,
         "arrays": directory},
        sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        fh.write(bytes(payload))


def read_container(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ContainerError(f"{path}: not a model container")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(mlen).decode())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ContainerError(
                f"{path}: unsupported format version {manifest.get('format_version')}")
        payload = fh.read()
    arrays = {}
    for name, entry in manifest["arrays"].items():
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        if hashlib.sha256(raw).hexdigest() != entry["sha256"]:
            raise ContainerError(f"{path}: checksum mismatch for array {name!r}")
        arrays[name] = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])) \
            .reshape(entry["shape"]).copy()
    return manifest["metadata"], arrays
