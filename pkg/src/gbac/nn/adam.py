"""Adam with optional global gradient-norm clipping, per ParamSet."""

from __future__ import annotations

import numpy as np

from .params import ParamSet


def clip_global_grad_norm(ps: ParamSet, max_norm: float) -> float:
    """Scale all gradients in the set so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm.
    """
    norm = ps.global_grad_norm()
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in ps.grads.values():
            g *= scale
    return norm


def adam_step(
    ps: ParamSet,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    max_grad_norm: float | None = None,
) -> float:
    """One bias-corrected Adam update over every parameter in the set.

    Clipping, when requested, happens before the moment updates. Returns the
    pre-clip global gradient norm.
    """
    norm = ps.global_grad_norm() if max_grad_norm is None else clip_global_grad_norm(ps, max_grad_norm)
    ps.step += 1
    bc1 = 1.0 - beta1**ps.step
    bc2 = 1.0 - beta2**ps.step
    for name, p in ps.params.items():
        g = ps.grads[name]
        m = ps.m[name]
        v = ps.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * np.square(g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return norm
