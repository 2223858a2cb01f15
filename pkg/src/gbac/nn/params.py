"""Named parameter collections with gradient and Adam-moment storage.

A ParamSet is one optimizer group: every tensor in it is updated with the same
learning rate. Insertion order is preserved and defines serialization order.
"""

from __future__ import annotations

import math

import numpy as np


class ParamSet:
    """Parameters plus per-parameter gradients and Adam moments."""

    def __init__(self, dtype=np.float32) -> None:
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.ascontiguousarray(value, dtype=self.dtype)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def add_grad(self, name: str, grad: np.ndarray) -> None:
        g = self.grads[name]
        if grad.shape != g.shape:
            raise ValueError(f"gradient shape {grad.shape} != param shape {g.shape} for {name!r}")
        g += grad

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0

    def count(self) -> int:
        return sum(p.size for p in self.params.values())

    def global_grad_norm(self) -> float:
        total = 0.0
        for g in self.grads.values():
            total += float(np.dot(g.reshape(-1), g.reshape(-1)))
        return math.sqrt(total)

    def astype(self, dtype) -> "ParamSet":
        """Copy of this set in another dtype (used by the float64 check mode)."""
        out = ParamSet(dtype)
        for name, p in self.params.items():
            out.add(name, p)
            out.grads[name][...] = self.grads[name]
            out.m[name][...] = self.m[name]
            out.v[name][...] = self.v[name]
        out.step = self.step
        return out

    def copy(self) -> "ParamSet":
        return self.astype(self.dtype)


def orthogonal(rng: np.random.Generator, shape: tuple[int, ...], gain: float = 1.0) -> np.ndarray:
    """Orthogonal-style init: QR of a gaussian matrix, sign-fixed, scaled by gain.

    For >2-d shapes the trailing dims are flattened, so conv kernels (F, C, k, k)
    get orthogonal rows in the (F, C*k*k) matrix.
    """
    rows = shape[0]
    cols = int(np.prod(shape[1:]))
    a = rng.standard_normal((rows, cols) if rows >= cols else (cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).reshape(shape)


def lstm_uniform(rng: np.random.Generator, shape: tuple[int, ...], hidden: int) -> np.ndarray:
    """Small uniform noise scaled by hidden width, for LSTM weight matrices."""
    k = 1.0 / math.sqrt(hidden)
    return rng.uniform(-k, k, size=shape)
