"""Finite-difference gradient checking.

Central differences with a fixed step, meant to be run with float64 parameter
sets. Analytic backward passes are verified against this harness; the harness
itself never calls any backward code.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def numerical_grad(loss_fn: Callable[[], float], x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of a scalar loss w.r.t. array x, in place.

    loss_fn takes no arguments and must read the current contents of x.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = loss_fn()
        flat[i] = orig - h
        fm = loss_fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Per-element relative error between two gradient arrays.

    Per element: |a - n| / max(|a|, |n|, 1e-3 * scale, 1e-8), where scale is
    the largest analytic magnitude in the tensor. Tiny components are judged
    against the tensor's own scale so finite-difference noise on near-zero
    entries does not dominate.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError(f"shape mismatch {analytic.shape} vs {numeric.shape}")
    if analytic.size == 0:
        return np.zeros(0)
    scale = float(np.max(np.abs(analytic)))
    denom = np.maximum.reduce(
        [
            np.abs(analytic),
            np.abs(numeric),
            np.full_like(analytic, max(1e-3 * scale, 1e-8)),
        ]
    )
    return np.abs(analytic - numeric) / denom


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case relative error between two gradient arrays; see rel_errors."""
    errs = rel_errors(analytic, numeric)
    return float(errs.max()) if errs.size else 0.0


def fd_check(
    loss_fn: Callable[[], float],
    x: np.ndarray,
    analytic: np.ndarray,
    h: float = 1e-3,
    refine_h: float = 1e-5,
    tol: float = 1e-3,
) -> float:
    """Worst relative error of analytic vs central differences, kink-aware.

    Coordinates that fail at the coarse step are re-measured individually at
    refine_h: a piecewise kink (ReLU) inside the coarse bracket corrupts the
    coarse estimate but not the fine one, while a genuinely wrong analytic
    gradient fails at every step size and is still reported.
    """
    numeric = numerical_grad(loss_fn, x, h)
    errs = rel_errors(analytic, numeric)
    if errs.size == 0 or float(errs.max()) < tol:
        return float(errs.max()) if errs.size else 0.0
    flat_x = x.reshape(-1)
    flat_num = numeric.reshape(-1)
    for i in np.flatnonzero(errs.reshape(-1) >= tol):
        orig = flat_x[i]
        flat_x[i] = orig + refine_h
        fp = loss_fn()
        flat_x[i] = orig - refine_h
        fm = loss_fn()
        flat_x[i] = orig
        flat_num[i] = (fp - fm) / (2.0 * refine_h)
    return max_rel_error(analytic, numeric)
