"""Minimal differentiable-network primitives used by the agent."""

from .adam import adam_step, clip_global_grad_norm
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import fd_check, max_rel_error, numerical_grad, rel_errors
from .ops import (
    affine_backward,
    affine_forward,
    categorical_backward,
    categorical_sample,
    categorical_stats,
    conv2d_backward,
    conv2d_forward,
    conv2d_out_hw,
    log_softmax,
    lstm_backward,
    lstm_forward,
    relu_backward,
    relu_forward,
    sigmoid,
    tanh_backward,
    tanh_forward,
)
from .params import ParamSet, lstm_uniform, orthogonal

__all__ = [
    "ParamSet",
    "adam_step",
    "affine_backward",
    "affine_forward",
    "categorical_backward",
    "categorical_sample",
    "categorical_stats",
    "CheckpointError",
    "clip_global_grad_norm",
    "conv2d_backward",
    "conv2d_forward",
    "conv2d_out_hw",
    "fd_check",
    "load_checkpoint",
    "log_softmax",
    "lstm_backward",
    "lstm_forward",
    "lstm_uniform",
    "max_rel_error",
    "numerical_grad",
    "orthogonal",
    "rel_errors",
    "relu_backward",
    "relu_forward",
    "save_checkpoint",
    "sigmoid",
    "tanh_backward",
    "tanh_forward",
]
