"""Checkpoint serialization: JSON manifest plus raw little-endian float32 blob.

A checkpoint is two files sharing a base path: ``<base>.json`` (manifest) and
``<base>.bin`` (concatenated tensor data). Round trips are bit-exact.
"""

from __future__ import annotations

import json
import os
from typing import Any

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    base: str,
    tensors: dict[str, np.ndarray],
    config_digest: str,
    extra: dict[str, Any] | None = None,
) -> None:
    """Write manifest and blob. Tensor order follows dict insertion order."""
    records = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        if arr.dtype != np.float32:
            raise CheckpointError(f"tensor {name!r} has dtype {arr.dtype}, expected float32")
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        records.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": "f32",
                "byte_offset": offset,
                "byte_len": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_digest": config_digest,
        "tensors": records,
        "extra": extra or {},
    }
    _atomic_write(base + ".json", json.dumps(manifest, indent=1, sort_keys=True).encode())
    _atomic_write(base + ".bin", b"".join(chunks))


def load_checkpoint(base: str) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read manifest and blob back; validates structure and sizes."""
    with open(base + ".json", "rb") as fh:
        manifest = json.loads(fh.read())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {manifest.get('format_version')!r}")
    with open(base + ".bin", "rb") as fh:
        blob = fh.read()
    tensors: dict[str, np.ndarray] = {}
    end = 0
    for rec in manifest["tensors"]:
        for key in ("name", "shape", "dtype", "byte_offset", "byte_len"):
            if key not in rec:
                raise CheckpointError(f"tensor record missing field {key!r}")
        if rec["dtype"] != "f32":
            raise CheckpointError(f"tensor {rec['name']!r} has unsupported dtype {rec['dtype']!r}")
        shape = tuple(int(s) for s in rec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if nbytes != rec["byte_len"]:
            raise CheckpointError(f"tensor {rec['name']!r}: byte_len {rec['byte_len']} does not match shape {shape}")
        lo, hi = rec["byte_offset"], rec["byte_offset"] + rec["byte_len"]
        if hi > len(blob):
            raise CheckpointError(f"tensor {rec['name']!r} extends past end of blob")
        tensors[rec["name"]] = np.frombuffer(blob[lo:hi], dtype="<f4").reshape(shape).copy()
        end = max(end, hi)
    if end != len(blob):
        raise CheckpointError(f"blob has {len(blob) - end} trailing bytes not covered by the manifest")
    return tensors, manifest


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
