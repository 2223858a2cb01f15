"""Retina-like glimpse extraction.

A glimpse is a stack of concentric square patches centered on a point of the
frame, each patch double the side of the previous one (configurable factor),
all downscaled by block averaging to the focal resolution. Coordinates are
continuous: loc = (x, y) in [-1, 1]^2 with (-1, -1) the top-left corner of the
frame and x mapping to columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pgm import write_pgm


@dataclass(frozen=True)
class GlimpseConfig:
    num_patches: int
    patch_size: int
    scale: int = 2

    def __post_init__(self) -> None:
        if self.num_patches < 1:
            raise ValueError(f"num_patches must be >= 1, got {self.num_patches}")
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")

    def side(self, index: int) -> int:
        return self.patch_size * self.scale**index

    def max_side(self) -> int:
        return self.side(self.num_patches - 1)


def pixel_budget(cfg: GlimpseConfig) -> int:
    """Pixels the agent actually processes per frame."""
    return cfg.num_patches * cfg.patch_size * cfg.patch_size


def round_half_up(v: float) -> int:
    """.5 always rounds away from zero toward +inf; used for all pixel snapping."""
    return int(math.floor(v + 0.5))


def loc_to_pixel(loc: tuple[float, float], h: int, w: int) -> tuple[float, float]:
    """Map loc (x, y) in [-1, 1]^2 to continuous (row, col) pixel coordinates."""
    x, y = float(loc[0]), float(loc[1])
    row = (y + 1.0) / 2.0 * (h - 1)
    col = (x + 1.0) / 2.0 * (w - 1)
    return row, col


def fit_patch(center_row: float, center_col: float, side: int, h: int, w: int) -> tuple[int, int]:
    """Top-left corner of a side x side patch, shifted to lie fully in frame."""
    if side > h or side > w:
        raise ValueError(f"patch side {side} exceeds frame {h}x{w}")
    r0 = min(max(round_half_up(center_row) - side // 2, 0), h - side)
    c0 = min(max(round_half_up(center_col) - side // 2, 0), w - side)
    return r0, c0


def downscale_avg(patch: np.ndarray, out_side: int) -> np.ndarray:
    """Block-mean downscale of a square patch to out_side x out_side."""
    side = patch.shape[0]
    if patch.shape != (side, side):
        raise ValueError(f"patch must be square, got {patch.shape}")
    if side % out_side:
        raise ValueError(f"side {side} not divisible by output side {out_side}")
    blk = side // out_side
    # One reduction per contiguous block keeps the summation order identical
    # to taking each block's mean on its own, so oracle comparisons are exact.
    blocks = patch.reshape(out_side, blk, out_side, blk).swapaxes(1, 2)
    return blocks.reshape(out_side, out_side, blk * blk).mean(axis=2)


def extract_glimpse(frame: np.ndarray, loc: tuple[float, float], cfg: GlimpseConfig) -> np.ndarray:
    """Stack of num_patches downscaled crops, smallest (sharpest) first.

    Each patch is fitted to the frame independently, so near borders the stack
    is no longer strictly concentric.
    """
    if frame.ndim != 2:
        raise ValueError(f"frame must be 2-D grayscale, got shape {frame.shape}")
    h, w = frame.shape
    if cfg.max_side() > min(h, w):
        raise ValueError(
            f"largest patch {cfg.max_side()} does not fit frame {h}x{w}; "
            "reduce num_patches or patch_size"
        )
    crow, ccol = loc_to_pixel(loc, h, w)
    out = np.empty((cfg.num_patches, cfg.patch_size, cfg.patch_size), dtype=frame.dtype)
    for i in range(cfg.num_patches):
        side = cfg.side(i)
        r0, c0 = fit_patch(crow, ccol, side, h, w)
        crop = frame[r0 : r0 + side, c0 : c0 + side]
        out[i] = crop if side == cfg.patch_size else downscale_avg(crop, cfg.patch_size)
    return out


def write_patch_pgms(
    frame: np.ndarray, loc: tuple[float, float], cfg: GlimpseConfig, out_base: str
) -> list[str]:
    """Debug output: one PGM per pyramid level, plus the raw (undownscaled) crops."""
    h, w = frame.shape
    crow, ccol = loc_to_pixel(loc, h, w)
    glimpse = extract_glimpse(frame, loc, cfg)
    paths = []
    for i in range(cfg.num_patches):
        path = f"{out_base}_level{i}.pgm"
        write_pgm(path, glimpse[i])
        paths.append(path)
        side = cfg.side(i)
        r0, c0 = fit_patch(crow, ccol, side, h, w)
        raw_path = f"{out_base}_crop{i}.pgm"
        write_pgm(raw_path, frame[r0 : r0 + side, c0 : c0 + side])
        paths.append(raw_path)
    return paths
