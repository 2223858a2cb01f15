"""Tiny binary PGM (P5) reader/writer for debug images and heatmaps."""

from __future__ import annotations

import numpy as np


def write_pgm(path: str, image: np.ndarray) -> None:
    """Write a 2-D array as 8-bit binary PGM.

    Float inputs are interpreted on [0, 1] and scaled; integer inputs must
    already be within [0, 255].
    """
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {image.shape}")
    if np.issubdtype(image.dtype, np.floating):
        data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    else:
        if image.min() < 0 or image.max() > 255:
            raise ValueError("integer PGM data must lie in [0, 255]")
        data = image.astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_pgm(path: str) -> np.ndarray:
    """Read a binary PGM written by write_pgm (or any maxval-255 P5 file)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) file")
    # header: magic, width, height, maxval; '#' comment lines allowed
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    data = np.frombuffer(raw, dtype=np.uint8, count=h * w, offset=pos)
    return data.reshape(h, w).copy()
