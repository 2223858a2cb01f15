"""Truncated normal on [-1, 1], the location policy's sampling distribution.

Sampling is per-axis rejection from the parent normal with an inverse-CDF
fallback after a bounded number of rejections, so it never hangs even for
means pushed against the boundary or vanishing sigma. Log-densities include
the truncation normalizer and are exact (stdlib erf), not approximations.
"""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

LO, HI = -1.0, 1.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_NORMAL = NormalDist()
_erf = np.vectorize(math.erf, otypes=[np.float64])


def _std_cdf(z: np.ndarray | float):
    return 0.5 * (1.0 + _erf(np.asarray(z, dtype=np.float64) / math.sqrt(2.0)))


def _std_logpdf(z: np.ndarray) -> np.ndarray:
    return -0.5 * z * z - _LOG_SQRT_2PI


def truncnorm_sample(
    mean: np.ndarray,
    std: float,
    rng: np.random.Generator,
    max_rejections: int = 100,
) -> np.ndarray:
    """One draw per axis of mean; every component lies in [LO, HI]."""
    mean = np.asarray(mean, dtype=np.float64)
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    out = np.empty_like(mean)
    flat_mean = mean.reshape(-1)
    flat_out = out.reshape(-1)
    for i, mu in enumerate(flat_mean):
        val = None
        for _ in range(max_rejections):
            z = rng.normal(mu, std)
            if LO <= z <= HI:
                val = z
                break
        if val is None:
            # inverse-CDF fallback: uniform over the truncated mass
            lo_u = _NORMAL.cdf((LO - mu) / std)
            hi_u = _NORMAL.cdf((HI - mu) / std)
            u = rng.uniform(lo_u, hi_u)
            u = min(max(u, 1e-15), 1.0 - 1e-15)
            val = mu + std * _NORMAL.inv_cdf(u)
        flat_out[i] = min(max(val, LO), HI)
    return out


def truncnorm_logpdf(x: np.ndarray, mean: np.ndarray, std: float) -> np.ndarray:
    """Joint log-density over the last axis (independent components).

    x, mean: (..., D) -> (...,). Returns float64.
    """
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    z = (x - mean) / std
    hi = (HI - mean) / std
    lo = (LO - mean) / std
    norm = _std_cdf(hi) - _std_cdf(lo)
    lp = _std_logpdf(z) - math.log(std) - np.log(norm)
    return lp.sum(axis=-1)


def truncnorm_logpdf_dmean(x: np.ndarray, mean: np.ndarray, std: float) -> np.ndarray:
    """Gradient of the joint log-density w.r.t. each mean component.

    d logpdf / d mu = (x - mu) / std^2 + (phi(hi_z) - phi(lo_z)) / (std * Z)
    """
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    hi = (HI - mean) / std
    lo = (LO - mean) / std
    norm = _std_cdf(hi) - _std_cdf(lo)
    phi_hi = np.exp(_std_logpdf(hi))
    phi_lo = np.exp(_std_logpdf(lo))
    return (x - mean) / (std * std) + (phi_hi - phi_lo) / (std * norm)


def uniform_logpdf(dim: int = 2) -> float:
    """Log-density of the uniform distribution on [LO, HI]^dim."""
    return -dim * math.log(HI - LO)
