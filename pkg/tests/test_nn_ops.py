"""Unit tests for the differentiable primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbac.nn import (
    ParamSet,
    adam_step,
    affine_forward,
    categorical_sample,
    categorical_stats,
    clip_global_grad_norm,
    conv2d_forward,
    conv2d_out_hw,
    log_softmax,
    lstm_forward,
    orthogonal,
    relu_forward,
    tanh_forward,
)
from helpers import FD_CHECKS, naive_conv2d, run_fd_battery


# ---------------------------------------------------------------------------
# hand-frozen values


def test_affine_hand_values():
    x = np.array([[1.0, 1.0]], dtype=np.float32)
    w = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    b = np.array([1.0, -1.0], dtype=np.float32)
    y, _ = affine_forward(x, w, b)
    np.testing.assert_allclose(y, [[4.0, 6.0]])


def test_affine_zero_params():
    x = np.random.default_rng(0).standard_normal((3, 5)).astype(np.float32)
    y, _ = affine_forward(x, np.zeros((4, 5), np.float32), np.zeros(4, np.float32))
    assert np.all(y == 0)


def test_conv_out_dims():
    assert conv2d_out_hw(84, 84, 8, 4) == (20, 20)
    assert conv2d_out_hw(16, 16, 4, 2) == (7, 7)
    assert conv2d_out_hw(3, 3, 3, 1) == (1, 1)
    with pytest.raises(ValueError):
        conv2d_out_hw(2, 5, 3, 1)


def test_conv_hand_values():
    x = np.ones((1, 1, 3, 3), dtype=np.float32)
    k = np.ones((1, 1, 2, 2), dtype=np.float32)
    b = np.zeros(1, dtype=np.float32)
    y, _ = conv2d_forward(x, k, b, 1)
    np.testing.assert_allclose(y, np.full((1, 1, 2, 2), 4.0))


def test_conv_matches_naive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        ch = int(rng.integers(1, 4))
        f = int(rng.integers(1, 5))
        k = int(rng.integers(1, 5))
        stride = int(rng.integers(1, 4))
        h = int(rng.integers(k, k + 9))
        w = int(rng.integers(k, k + 9))
        x = rng.standard_normal((2, ch, h, w))
        kern = rng.standard_normal((f, ch, k, k))
        b = rng.standard_normal(f)
        y, _ = conv2d_forward(x, kern, b, stride)
        np.testing.assert_allclose(y, naive_conv2d(x, kern, b, stride), atol=1e-10)


def test_lstm_zero_weights_zero_output():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 3)).astype(np.float32)
    h = rng.standard_normal((4, 5)).astype(np.float32) * 0  # zero state
    c = np.zeros_like(h)
    w = np.zeros((20, 8), dtype=np.float32)
    b = np.zeros(20, dtype=np.float32)
    h2, c2, _ = lstm_forward(x, h, c, w, b)
    assert np.all(h2 == 0) and np.all(c2 == 0)
    assert h2.shape == (4, 5)


def test_lstm_preserves_dtype():
    x = np.zeros((2, 3), dtype=np.float32)
    h = np.zeros((2, 4), dtype=np.float32)
    w = np.zeros((16, 7), dtype=np.float32)
    h2, c2, _ = lstm_forward(x, h, h.copy(), w, np.zeros(16, np.float32))
    assert h2.dtype == np.float32 and c2.dtype == np.float32


def test_entropy_uniform_and_skewed():
    logits = np.zeros((1, 6))
    _, ent, _ = categorical_stats(logits, np.array([0]))
    assert ent[0] == pytest.approx(math.log(6), abs=1e-9)
    logits = np.log(np.array([[1.0, 3.0]]))
    _, ent, _ = categorical_stats(logits, np.array([1]))
    assert ent[0] == pytest.approx(0.5623, abs=1e-4)


def test_entropy_near_one_hot():
    logits = np.array([[0.0, 60.0]])
    _, ent, _ = categorical_stats(logits, np.array([1]))
    assert 0.0 <= ent[0] < 1e-6


def test_categorical_sample_frequencies_and_determinism():
    logits = np.tile(np.log(np.array([[1.0, 3.0]])), (20000, 1))
    a1 = categorical_sample(logits, np.random.default_rng(5))
    a2 = categorical_sample(logits, np.random.default_rng(5))
    assert np.array_equal(a1, a2)
    frac = a1.mean()
    assert abs(frac - 0.75) < 0.02


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e4, max_value=1e4, allow_nan=False), min_size=2, max_size=8
    )
)
def test_log_softmax_normalizes(logit_row):
    logp = log_softmax(np.array([logit_row]))
    assert np.isfinite(logp).all()
    assert math.isclose(float(np.exp(logp).sum()), 1.0, rel_tol=1e-9)


def test_relu_tanh_values():
    x = np.array([-2.0, 0.0, 3.0])
    y, _ = relu_forward(x)
    np.testing.assert_allclose(y, [0.0, 0.0, 3.0])
    y, _ = tanh_forward(np.array([0.0]))
    assert y[0] == 0.0


# ---------------------------------------------------------------------------
# gradients vs finite differences


@pytest.mark.parametrize("name", sorted(FD_CHECKS))
def test_fd_single_config(name):
    rng = np.random.default_rng(123)
    err = FD_CHECKS[name](rng)
    assert err < 1e-3, f"{name}: rel err {err:.2e}"


def test_fd_battery_small():
    for name, idx, err in run_fd_battery(3, seed=1):
        assert err < 1e-3, f"{name}[{idx}]: rel err {err:.2e}"


# ---------------------------------------------------------------------------
# optimizer


def _single_param_set(value, grad):
    ps = ParamSet(np.float64)
    ps.add("w", np.array(value, dtype=np.float64))
    ps.grads["w"][...] = grad
    return ps


def test_adam_zero_grad_no_change():
    ps = _single_param_set([1.0, -2.0], [0.0, 0.0])
    before = ps["w"].copy()
    adam_step(ps, lr=0.1)
    np.testing.assert_array_equal(ps["w"], before)


def test_adam_first_step_magnitude():
    ps = _single_param_set([0.0], [1.0])
    adam_step(ps, lr=0.05)
    # bias-corrected first step is -lr * g / (|g| + eps)
    assert ps["w"][0] == pytest.approx(-0.05, rel=1e-6)


def test_grad_clip_scale():
    ps = _single_param_set([0.0, 0.0], [3.0, 4.0])
    pre = clip_global_grad_norm(ps, 1.25)
    assert pre == pytest.approx(5.0)
    np.testing.assert_allclose(ps.grads["w"], [0.75, 1.0], rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=12),
    st.floats(min_value=0.01, max_value=10.0),
)
def test_post_clip_norm_bounded(grads, max_norm):
    ps = _single_param_set(np.zeros(len(grads)), grads)
    clip_global_grad_norm(ps, max_norm)
    assert ps.global_grad_norm() <= max_norm + 1e-6


def test_adam_step_counter_and_clip_integration():
    ps = _single_param_set([0.0, 0.0], [30.0, 40.0])
    norm = adam_step(ps, lr=0.1, max_grad_norm=0.5)
    assert norm == pytest.approx(50.0)
    assert ps.step == 1
    assert ps.global_grad_norm() <= 0.5 + 1e-6


# ---------------------------------------------------------------------------
# init and bookkeeping


def test_orthogonal_rows_orthonormal():
    rng = np.random.default_rng(3)
    w = orthogonal(rng, (4, 9), gain=1.0)
    np.testing.assert_allclose(w @ w.T, np.eye(4), atol=1e-8)
    w2 = orthogonal(rng, (9, 4), gain=2.0)
    np.testing.assert_allclose(w2.T @ w2, 4.0 * np.eye(4), atol=1e-8)


def test_paramset_count_and_duplicates():
    ps = ParamSet()
    ps.add("a", np.zeros((10, 5)))
    ps.add("b", np.zeros(5))
    assert ps.count() == 55
    with pytest.raises(ValueError):
        ps.add("a", np.zeros(1))
