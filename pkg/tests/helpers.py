"""Shared test oracles: brute-force references and the finite-difference battery.

Everything here is deliberately naive and independent of the library's own
backward passes; tests compare fast implementations against these.
"""

from __future__ import annotations

import numpy as np

from gbac.nn import (
    affine_forward,
    conv2d_forward,
    conv2d_backward,
    affine_backward,
    lstm_forward,
    lstm_backward,
    categorical_stats,
    categorical_backward,
    fd_check,
    max_rel_error,
    numerical_grad,
)


def naive_conv2d(x: np.ndarray, kern: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Quadruple-loop valid convolution, the forward-value oracle."""
    bsz, ch, h, w = x.shape
    f, _, k, _ = kern.shape
    h2 = (h - k) // stride + 1
    w2 = (w - k) // stride + 1
    out = np.zeros((bsz, f, h2, w2), dtype=np.float64)
    for n in range(bsz):
        for fi in range(f):
            for i in range(h2):
                for j in range(w2):
                    patch = x[n, :, i * stride : i * stride + k, j * stride : j * stride + k]
                    out[n, fi, i, j] = np.sum(patch * kern[fi]) + b[fi]
    return out


def naive_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Advantage oracle: direct truncated sum of discounted lambda-weighted deltas."""
    t_max = len(rewards)
    next_values = list(values[1:]) + [bootstrap]
    deltas = [
        rewards[t] + gamma * next_values[t] * (1.0 - dones[t]) - values[t] for t in range(t_max)
    ]
    adv = []
    for t in range(t_max):
        total = 0.0
        coef = 1.0
        for j in range(t, t_max):
            total += coef * deltas[j]
            if dones[j]:
                break
            coef *= gamma * lam
        adv.append(total)
    return np.array(adv, dtype=np.float64)


# ---------------------------------------------------------------------------
# finite-difference battery over every primitive, random configurations


def _proj_loss(out: np.ndarray, r: np.ndarray) -> float:
    return float(np.sum(out * r))


def _check_affine(rng: np.random.Generator) -> float:
    bsz = int(rng.integers(1, 5))
    i = int(rng.integers(1, 8))
    o = int(rng.integers(1, 8))
    x = rng.standard_normal((bsz, i))
    w = rng.standard_normal((o, i))
    b = rng.standard_normal(o)
    r = rng.standard_normal((bsz, o))
    y, cache = affine_forward(x, w, b)
    dx, dw, db = affine_backward(r, cache)
    worst = 0.0
    for arr, an in ((x, dx), (w, dw), (b, db)):
        err = fd_check(lambda: _proj_loss(affine_forward(x, w, b)[0], r), arr, an)
        worst = max(worst, err)
    return worst


def _check_conv(rng: np.random.Generator) -> float:
    bsz = int(rng.integers(1, 3))
    ch = int(rng.integers(1, 4))
    f = int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    h = k + stride * int(rng.integers(0, 4))
    w = k + stride * int(rng.integers(0, 4)) + int(rng.integers(0, 2))
    x = rng.standard_normal((bsz, ch, h, w))
    kern = rng.standard_normal((f, ch, k, k))
    b = rng.standard_normal(f)
    y, cache = conv2d_forward(x, kern, b, stride)
    r = rng.standard_normal(y.shape)
    dx, dk, db = conv2d_backward(r, cache)
    worst = 0.0
    for arr, an in ((x, dx), (kern, dk), (b, db)):
        err = fd_check(lambda: _proj_loss(conv2d_forward(x, kern, b, stride)[0], r), arr, an)
        worst = max(worst, err)
    return worst


def _check_lstm(rng: np.random.Generator) -> float:
    """Three-step unrolled sequence, loss reads every intermediate hidden state."""
    bsz = int(rng.integers(1, 3))
    i = int(rng.integers(1, 5))
    hid = int(rng.integers(1, 5))
    xs = rng.standard_normal((3, bsz, i))
    h0 = rng.standard_normal((bsz, hid))
    c0 = rng.standard_normal((bsz, hid))
    w = rng.standard_normal((4 * hid, i + hid)) * 0.5
    b = rng.standard_normal(4 * hid) * 0.5
    rs = rng.standard_normal((3, bsz, hid))

    def unroll():
        h, c = h0, c0
        loss = 0.0
        caches = []
        for t in range(3):
            h, c, cache = lstm_forward(xs[t], h, c, w, b)
            caches.append(cache)
            loss += _proj_loss(h, rs[t])
        return loss, caches

    loss, caches = unroll()
    dw = np.zeros_like(w)
    db = np.zeros_like(b)
    dxs = np.zeros_like(xs)
    dh = np.zeros((bsz, hid))
    dc = np.zeros((bsz, hid))
    for t in reversed(range(3)):
        dx_t, dh, dc, dw_t, db_t = lstm_backward(dh + rs[t], dc, caches[t])
        dxs[t] = dx_t
        dw += dw_t
        db += db_t
    worst = 0.0
    for arr, an in ((xs, dxs), (h0, dh), (c0, dc), (w, dw), (b, db)):
        worst = max(worst, fd_check(lambda: unroll()[0], arr, an))
    return worst


def _check_categorical(rng: np.random.Generator) -> float:
    bsz = int(rng.integers(1, 5))
    a = int(rng.integers(2, 7))
    logits = rng.standard_normal((bsz, a))
    actions = rng.integers(0, a, size=bsz)
    r1 = rng.standard_normal(bsz)
    r2 = rng.standard_normal(bsz)
    chosen, entropy, cache = categorical_stats(logits, actions)
    dlogits = categorical_backward(r1, r2, cache)

    def loss():
        ch, ent, _ = categorical_stats(logits, actions)
        return float(np.sum(ch * r1) + np.sum(ent * r2))

    return fd_check(loss, logits, dlogits)


FD_CHECKS = {
    "affine": _check_affine,
    "conv2d": _check_conv,
    "lstm_3step": _check_lstm,
    "categorical": _check_categorical,
}


def run_fd_battery(n_configs: int, seed: int = 0) -> list[tuple[str, int, float]]:
    """Run every primitive's FD check over n_configs random configurations.

    Returns (op name, config index, worst relative error) triples. Uses float64
    throughout; callers assert each error is below 1e-3.
    """
    results = []
    for idx in range(n_configs):
        rng = np.random.default_rng(seed * 1000 + idx)
        for name, fn in FD_CHECKS.items():
            results.append((name, idx, fn(rng)))
    return results


def naive_glimpse(frame: np.ndarray, loc, num_patches: int, size: int, scale: int) -> np.ndarray:
    """Loop-based glimpse oracle: crop each fitted patch, mean over each block."""
    import math

    h, w = frame.shape
    row = (loc[1] + 1.0) / 2.0 * (h - 1)
    col = (loc[0] + 1.0) / 2.0 * (w - 1)
    out = []
    for i in range(num_patches):
        side = size * scale**i
        r0 = min(max(math.floor(row + 0.5) - side // 2, 0), h - side)
        c0 = min(max(math.floor(col + 0.5) - side // 2, 0), w - side)
        crop = frame[r0 : r0 + side, c0 : c0 + side]
        blk = side // size
        level = np.zeros((size, size), dtype=np.float64)
        for a in range(size):
            for b in range(size):
                level[a, b] = crop[a * blk : (a + 1) * blk, b * blk : (b + 1) * blk].mean(
                    dtype=np.float64
                )
        out.append(level)
    return np.stack(out)


def _check_truncnorm_logpdf(rng: np.random.Generator) -> float:
    from gbac.truncnorm import truncnorm_logpdf, truncnorm_logpdf_dmean

    sigma = float(rng.uniform(0.05, 0.6))
    x = rng.uniform(-1, 1, size=(4, 2))
    mean = rng.uniform(-0.96, 0.96, size=(4, 2))
    analytic = truncnorm_logpdf_dmean(x, mean, sigma)
    num = numerical_grad(lambda: float(truncnorm_logpdf(x, mean, sigma).sum()), mean, h=1e-5)
    return max_rel_error(analytic, num)


def tiny_agent(rng: np.random.Generator, dtype=np.float64, compute_loc: bool = True):
    """Small random agent + replay inputs for composed gradient checks.

    Every parameter gets a generic random offset: with zero-init biases a dead
    upstream row parks ReLU pre-activations exactly on the kink, where central
    differences measure the two-sided slope average instead of the subgradient.
    Generic offsets keep evaluation points away from that measure-zero set.
    """
    from gbac.agent import ArchConfig, GbacAgent
    from gbac.glimpse import GlimpseConfig

    n = int(rng.integers(1, 3))
    size = int(rng.integers(3, 6))
    stacks = [((3, 2, 1),), ((2, 2, 2), (3, 2, 1)), ((4, 3, 1),)]
    stack = stacks[int(rng.integers(0, len(stacks)))]
    if size < 4 and len(stack) > 1:
        stack = stacks[0]
    arch = ArchConfig(
        glimpse_fc=int(rng.integers(3, 7)),
        loc_fc=int(rng.integers(2, 5)),
        lstm=int(rng.integers(2, 6)),
        merge=int(rng.integers(3, 7)),
        locator_hidden=int(rng.integers(2, 5)),
        conv_stack=stack,
    )
    agent = GbacAgent(
        GlimpseConfig(n, size), arch, action_count=int(rng.integers(2, 5)),
        seed=int(rng.integers(0, 1000)), dtype=dtype,
    )
    for ps in (agent.ps_action, agent.ps_loc):
        for name in ps.names():
            ps.params[name] += rng.uniform(-0.3, 0.3, size=ps.params[name].shape)
    t_len, bsz = 3, 2
    glimpses = rng.standard_normal((t_len, bsz, n, size, size))
    prev_locs = rng.uniform(-1, 1, size=(t_len, bsz, 2))
    done_prev = np.zeros((t_len, bsz))
    if rng.random() < 0.5:
        done_prev[2, int(rng.integers(0, bsz))] = 1.0
    hid = arch.lstm
    init = {
        "h_a": rng.standard_normal((bsz, hid)) * 0.3,
        "c_a": rng.standard_normal((bsz, hid)) * 0.3,
        "h_l": rng.standard_normal((bsz, hid)) * 0.3,
        "c_l": rng.standard_normal((bsz, hid)) * 0.3,
    }
    return agent, glimpses, prev_locs, done_prev, init


def _check_agent_replay(rng: np.random.Generator) -> float:
    agent, glimpses, prev_locs, done_prev, init = tiny_agent(rng)
    logits, values, means, _ = agent.replay(glimpses, prev_locs, done_prev, init)
    r_logits = rng.standard_normal(logits.shape)
    r_values = rng.standard_normal(values.shape)
    r_means = rng.standard_normal(means.shape)

    def loss():
        lo, va, me, _ = agent.replay(glimpses, prev_locs, done_prev, init)
        return float(np.sum(lo * r_logits) + np.sum(va * r_values) + np.sum(me * r_means))

    agent.ps_action.zero_grads()
    agent.ps_loc.zero_grads()
    _, _, _, ctx = agent.replay(glimpses, prev_locs, done_prev, init)
    agent.replay_backward(ctx, r_logits, r_values, r_means)
    worst = 0.0
    for ps in (agent.ps_action, agent.ps_loc):
        for name in ps.names():
            worst = max(worst, fd_check(loss, ps.params[name], ps.grads[name]))
    return worst


FD_CHECKS["truncnorm_logpdf"] = _check_truncnorm_logpdf
FD_CHECKS["agent_replay"] = _check_agent_replay
