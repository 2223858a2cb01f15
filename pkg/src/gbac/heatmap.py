"""Glimpse-center heatmaps: trace CSV -> pixel counts -> PGM/CSV/PNG.

A heatmap is an H x W integer grid counting how often each pixel was chosen
as a glimpse center. Locations come from eval trace files in [-1, 1]^2 and are
snapped with the same half-up rounding the glimpse extractor uses, so the
analysis sees exactly what the agent looked at.
"""

from __future__ import annotations

import csv

import numpy as np

from .glimpse import loc_to_pixel, round_half_up


class TraceError(ValueError):
    """Malformed trace content; message carries the 1-based line number."""


def read_trace_locations(path: str) -> np.ndarray:
    """Parse (x, y) columns from an eval trace; strict range validation.

    Returns an (N, 2) float array. Any location outside [-1, 1] (or a malformed
    row) is rejected with its line number rather than silently skewing counts.
    """
    locs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace file")
        try:
            x_col = header.index("x")
            y_col = header.index("y")
        except ValueError as exc:
            raise TraceError(f"{path}: header must contain x and y columns, got {header}") from exc
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x = float(row[x_col])
                y = float(row[y_col])
            except (ValueError, IndexError) as exc:
                raise TraceError(f"{path} line {line_no}: malformed record {row!r}") from exc
            if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
                raise TraceError(
                    f"{path} line {line_no}: location ({x}, {y}) outside [-1, 1]"
                )
            locs.append((x, y))
    return np.asarray(locs, dtype=np.float64).reshape(-1, 2)


def accumulate_heatmap(locs: np.ndarray, h: int, w: int) -> np.ndarray:
    """Count chosen centers per pixel; total count equals len(locs)."""
    if h < 1 or w < 1:
        raise ValueError(f"frame dims must be positive, got {h}x{w}")
    counts = np.zeros((h, w), dtype=np.int64)
    for x, y in np.asarray(locs, dtype=np.float64).reshape(-1, 2):
        row_f, col_f = loc_to_pixel((x, y), h, w)
        counts[round_half_up(row_f), round_half_up(col_f)] += 1
    return counts


def write_pgm(counts: np.ndarray, path: str) -> None:
    """Binary P5 PGM, max-normalized to 255 (all-zero map stays black)."""
    peak = int(counts.max())
    if peak > 0:
        img = np.floor(counts.astype(np.float64) / peak * 255.0 + 0.5).astype(np.uint8)
    else:
        img = np.zeros_like(counts, dtype=np.uint8)
    h, w = counts.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_sparse_csv(counts: np.ndarray, path: str) -> None:
    """row,col,count for every nonzero pixel, row-major order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,count\n")
        for r, c in zip(*np.nonzero(counts)):
            fh.write(f"{r},{c},{counts[r, c]}\n")


def render_heatmap_png(counts: np.ndarray, path: str, title: str = "glimpse centers") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6 * counts.shape[0] / max(counts.shape[1], 1)))
    im = ax.imshow(counts, cmap="hot", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    fig.colorbar(im, ax=ax, shrink=0.8, label="times chosen")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def heatmap_from_trace(trace_path: str, h: int, w: int, out_base: str) -> dict:
    """Full pipeline: trace -> counts -> <out_base>.pgm/.csv/.png; returns summary."""
    locs = read_trace_locations(trace_path)
    counts = accumulate_heatmap(locs, h, w)
    write_pgm(counts, out_base + ".pgm")
    write_sparse_csv(counts, out_base + ".csv")
    render_heatmap_png(counts, out_base + ".png")
    return {
        "records": int(len(locs)),
        "total": int(counts.sum()),
        "peak": int(counts.max()) if counts.size else 0,
        "nonzero_pixels": int(np.count_nonzero(counts)),
        "outputs": [out_base + ext for ext in (".pgm", ".csv", ".png")],
    }
