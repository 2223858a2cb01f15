"""Differentiable primitives for the fixed agent architecture.

Every op is a pure function returning (output, cache); the matching backward
takes upstream gradients plus the cache and returns gradients for each input.
No general autodiff: the model code wires these by hand. All ops preserve the
input dtype, so the same code runs in float32 at train time and float64 under
the gradient-check harness.

Conventions:
  - affine weights are (out, in), y = x @ W.T + b
  - conv kernels are (filters, in_channels, k, k), valid padding, square stride
  - LSTM gate order in the packed weight matrix is i, f, g, o
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

# ---------------------------------------------------------------------------
# elementwise


def relu_forward(x: np.ndarray):
    y = np.maximum(x, 0)
    return y, (x > 0)


def relu_backward(dy: np.ndarray, cache) -> np.ndarray:
    return dy * cache


def tanh_forward(x: np.ndarray):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy: np.ndarray, cache) -> np.ndarray:
    y = cache
    return dy * (1 - y * y)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic; never exponentiates a positive argument."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1 / (1 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1 + ez)
    return out


# ---------------------------------------------------------------------------
# affine


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (B, I), w (O, I), b (O,) -> y (B, O)."""
    y = x @ w.T
    y += b
    return y, (x, w)


def affine_backward(dy: np.ndarray, cache):
    x, w = cache
    dx = dy @ w
    dw = dy.T @ x
    db = dy.sum(axis=0)
    return dx, dw, db


# ---------------------------------------------------------------------------
# conv2d, valid padding


def conv2d_out_hw(h: int, w: int, k: int, stride: int) -> tuple[int, int]:
    if h < k or w < k:
        raise ValueError(f"input {h}x{w} smaller than kernel {k}")
    return (h - k) // stride + 1, (w - k) // stride + 1


def _im2col(x: np.ndarray, k: int, stride: int, h2: int, w2: int) -> np.ndarray:
    """(B, C, H, W) -> contiguous (B*h2*w2, C*k*k) patch matrix."""
    bsz, ch, _, _ = x.shape
    sb, sc, sh, sw = x.strides
    win = as_strided(
        x,
        shape=(bsz, h2, w2, ch, k, k),
        strides=(sb, sh * stride, sw * stride, sc, sh, sw),
        writeable=False,
    )
    return np.ascontiguousarray(win).reshape(bsz * h2 * w2, ch * k * k)


def conv2d_forward(x: np.ndarray, kern: np.ndarray, b: np.ndarray, stride: int):
    """x (B, C, H, W), kern (F, C, k, k) -> y (B, F, H2, W2)."""
    bsz, ch, h, w = x.shape
    f, ck, k, k2 = kern.shape
    if ck != ch or k != k2:
        raise ValueError(f"kernel {kern.shape} does not match input channels {ch}")
    h2, w2 = conv2d_out_hw(h, w, k, stride)
    cols = _im2col(x, k, stride, h2, w2)
    wmat = kern.reshape(f, ch * k * k)
    y = cols @ wmat.T
    y += b
    y = y.reshape(bsz, h2, w2, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), (cols, wmat, x.shape, k, stride, h2, w2)


def conv2d_backward(dy: np.ndarray, cache):
    cols, wmat, xshape, k, stride, h2, w2 = cache
    bsz, ch, h, w = xshape
    f = wmat.shape[0]
    dyf = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(bsz * h2 * w2, f)
    dwmat = dyf.T @ cols
    db = dyf.sum(axis=0)
    dcols = dyf @ wmat
    dcols = dcols.reshape(bsz, h2, w2, ch, k, k)
    dx = np.zeros(xshape, dtype=dy.dtype)
    # scatter-add one kernel offset at a time; slices inside one offset never overlap
    for ki in range(k):
        for kj in range(k):
            patch = dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
            dx[:, :, ki : ki + h2 * stride : stride, kj : kj + w2 * stride : stride] += patch
    return dx, dwmat.reshape(f, ch, k, k), db


# ---------------------------------------------------------------------------
# LSTM cell


def lstm_forward(x: np.ndarray, h: np.ndarray, c: np.ndarray, w: np.ndarray, b: np.ndarray):
    """One step. x (B, I), h/c (B, H), w (4H, I+H), b (4H,). Gate order i, f, g, o."""
    hid = h.shape[1]
    xh = np.concatenate([x, h], axis=1)
    z = xh @ w.T
    z += b
    zi, zf, zg, zo = (z[:, i * hid : (i + 1) * hid] for i in range(4))
    gi = sigmoid(zi)
    gf = sigmoid(zf)
    gg = np.tanh(zg)
    go = sigmoid(zo)
    c2 = gf * c + gi * gg
    tc2 = np.tanh(c2)
    h2 = go * tc2
    return h2, c2, (xh, c, gi, gf, gg, go, tc2, w)


def lstm_backward(dh2: np.ndarray, dc2: np.ndarray, cache):
    xh, c, gi, gf, gg, go, tc2, w = cache
    hid = gi.shape[1]
    insz = xh.shape[1] - hid
    dc = dc2 + dh2 * go * (1 - tc2 * tc2)
    dzo = dh2 * tc2 * go * (1 - go)
    dzf = dc * c * gf * (1 - gf)
    dzi = dc * gg * gi * (1 - gi)
    dzg = dc * gi * (1 - gg * gg)
    dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
    dxh = dz @ w
    dw = dz.T @ xh
    db = dz.sum(axis=0)
    return dxh[:, :insz], dxh[:, insz:], dc * gf, dw, db


# ---------------------------------------------------------------------------
# categorical head


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def categorical_sample(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling, one draw per row; deterministic given the rng stream."""
    p = np.exp(log_softmax(logits))
    cum = np.cumsum(p, axis=-1)
    u = rng.random((logits.shape[0], 1), dtype=np.float64)
    a = (u > cum).sum(axis=-1)
    return np.minimum(a, logits.shape[-1] - 1).astype(np.int64)


def categorical_stats(logits: np.ndarray, actions: np.ndarray):
    """Log-probability of chosen actions and per-row entropy, with cache."""
    logp = log_softmax(logits)
    p = np.exp(logp)
    chosen = np.take_along_axis(logp, actions[:, None], axis=-1)[:, 0]
    entropy = -(p * logp).sum(axis=-1)
    return chosen, entropy, (p, logp, actions, entropy)


def categorical_backward(dchosen: np.ndarray, dentropy: np.ndarray, cache) -> np.ndarray:
    """Gradients w.r.t. logits from d(chosen logprob) and d(entropy) per row.

    d chosen/d logits = onehot(a) - p
    d entropy/d logits_j = -p_j * (logp_j + H)
    """
    p, logp, actions, entropy = cache
    dlogits = -p * dchosen[:, None]
    dlogits[np.arange(p.shape[0]), actions] += dchosen
    if dentropy is not None:
        dlogits += dentropy[:, None] * (-p * (logp + entropy[:, None]))
    return dlogits
