"""The glimpse agent: feature trunk, action head, and location head.

Three pieces share one narrow interface:

  - glimpse trunk: conv stack + affine + ReLU over the patch pyramid -> features
  - action net: LSTM over features -> actor logits + state-value head
  - location net: previous-loc features merged with glimpse features -> LSTM ->
    two-layer locator ending in tanh, the mean of a truncated normal on [-1,1]^2

Nothing in any layer depends on frame dimensions, only on the glimpse config
and the architecture widths, so parameter count is frame-size independent.

Batched forward passes double as the training replay path: every cached
forward has a matching backward that accumulates parameter gradients into the
two optimizer groups ({trunk + action} and {location}).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .glimpse import GlimpseConfig, extract_glimpse
from .nn import (
    ParamSet,
    affine_backward,
    affine_forward,
    categorical_sample,
    categorical_stats,
    conv2d_backward,
    conv2d_forward,
    conv2d_out_hw,
    log_softmax,
    lstm_backward,
    lstm_forward,
    lstm_uniform,
    orthogonal,
    relu_backward,
    relu_forward,
    tanh_backward,
    tanh_forward,
)
from .truncnorm import truncnorm_logpdf, truncnorm_sample, uniform_logpdf

ACT_MODES = ("sample", "greedy", "random_loc")


def default_conv_stack(patch_size: int) -> tuple[tuple[int, int, int], ...]:
    """(filters, kernel, stride) stack bucketed by focal patch size."""
    if patch_size >= 40:
        return ((32, 8, 4), (64, 4, 2), (64, 3, 1))
    if patch_size >= 12:
        return ((32, 4, 2), (64, 3, 1))
    if patch_size >= 3:
        return ((32, 3, 1),)
    raise ValueError(f"patch_size {patch_size} too small for any conv stack")


@dataclass(frozen=True)
class ArchConfig:
    glimpse_fc: int = 384
    loc_fc: int = 256
    lstm: int = 128
    merge: int = 768
    locator_hidden: int = 256
    locator_std: float = 0.1
    conv_stack: Optional[tuple[tuple[int, int, int], ...]] = None

    def __post_init__(self) -> None:
        for name in ("glimpse_fc", "loc_fc", "lstm", "merge", "locator_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"arch.{name} must be >= 1")
        if not self.locator_std > 0:
            raise ValueError(f"arch.locator_std must be positive, got {self.locator_std}")

    def resolved_conv_stack(self, patch_size: int) -> tuple[tuple[int, int, int], ...]:
        if self.conv_stack is not None:
            return tuple(tuple(layer) for layer in self.conv_stack)
        return default_conv_stack(patch_size)


@dataclass
class AgentState:
    """Per-episode recurrent state; reset to zeros and center loc at episode start."""

    h_a: np.ndarray
    c_a: np.ndarray
    h_l: np.ndarray
    c_l: np.ndarray
    last_loc: np.ndarray


@dataclass(frozen=True)
class StepOutput:
    action: int
    action_logprob: float
    value: float
    next_loc: np.ndarray
    loc_logprob: float
    loc_mean: np.ndarray


class GbacAgent:
    """Parameters plus forward/backward passes for the full agent."""

    def __init__(
        self,
        glimpse_cfg: GlimpseConfig,
        arch: ArchConfig,
        action_count: int,
        seed: int = 0,
        dtype=np.float32,
    ) -> None:
        if action_count < 2:
            raise ValueError(f"action_count must be >= 2, got {action_count}")
        self.glimpse_cfg = glimpse_cfg
        self.arch = arch
        self.action_count = action_count
        self.dtype = np.dtype(dtype)
        self.conv_stack = arch.resolved_conv_stack(glimpse_cfg.patch_size)

        ch, side = glimpse_cfg.num_patches, glimpse_cfg.patch_size
        self.conv_dims: list[tuple[int, int, int]] = [(ch, side, side)]
        for filters, k, stride in self.conv_stack:
            h2, w2 = conv2d_out_hw(side, side, k, stride)
            self.conv_dims.append((filters, h2, w2))
            ch, side = filters, h2
        self.conv_flat = int(np.prod(self.conv_dims[-1]))

        rng = np.random.default_rng(seed)
        a = self.ps_action = ParamSet(dtype)
        g = self.ps_loc = ParamSet(dtype)
        root2 = float(np.sqrt(2.0))

        in_ch = glimpse_cfg.num_patches
        for i, (filters, k, stride) in enumerate(self.conv_stack):
            a.add(f"glimpse.conv{i}.w", orthogonal(rng, (filters, in_ch, k, k), root2))
            a.add(f"glimpse.conv{i}.b", np.zeros(filters))
            in_ch = filters
        a.add("glimpse.fc.w", orthogonal(rng, (arch.glimpse_fc, self.conv_flat), root2))
        a.add("glimpse.fc.b", np.zeros(arch.glimpse_fc))

        hid = arch.lstm
        a.add("action.lstm.w", lstm_uniform(rng, (4 * hid, arch.glimpse_fc + hid), hid))
        a.add("action.lstm.b", _lstm_bias(hid))
        a.add("action.actor.w", orthogonal(rng, (action_count, hid), 0.01))
        a.add("action.actor.b", np.zeros(action_count))
        a.add("action.critic.w", orthogonal(rng, (1, hid), 1.0))
        a.add("action.critic.b", np.zeros(1))

        g.add("loc.feat.w", orthogonal(rng, (arch.loc_fc, 2), root2))
        g.add("loc.feat.b", np.zeros(arch.loc_fc))
        g.add("loc.merge.w", orthogonal(rng, (arch.merge, arch.glimpse_fc + arch.loc_fc), root2))
        g.add("loc.merge.b", np.zeros(arch.merge))
        g.add("loc.lstm.w", lstm_uniform(rng, (4 * hid, arch.merge + hid), hid))
        g.add("loc.lstm.b", _lstm_bias(hid))
        g.add("loc.head0.w", orthogonal(rng, (arch.locator_hidden, hid), root2))
        g.add("loc.head0.b", np.zeros(arch.locator_hidden))
        g.add("loc.head1.w", orthogonal(rng, (2, arch.locator_hidden), 0.01))
        g.add("loc.head1.b", np.zeros(2))

    # ------------------------------------------------------------------
    # forward passes (batched; caches returned for the training path)

    def features(self, glimpses: np.ndarray):
        """(B, n, s, s) -> (B, glimpse_fc), plus backward cache."""
        a = self.ps_action
        x = glimpses
        caches = []
        for i in range(len(self.conv_stack)):
            stride = self.conv_stack[i][2]
            y, conv_cache = conv2d_forward(x, a[f"glimpse.conv{i}.w"], a[f"glimpse.conv{i}.b"], stride)
            x, relu_cache = relu_forward(y)
            caches.append((conv_cache, relu_cache))
        flat = x.reshape(x.shape[0], -1)
        pre, fc_cache = affine_forward(flat, a["glimpse.fc.w"], a["glimpse.fc.b"])
        feats, fc_relu = relu_forward(pre)
        return feats, (caches, fc_cache, fc_relu, x.shape)

    def features_backward(self, dfeats: np.ndarray, cache) -> None:
        a = self.ps_action
        conv_caches, fc_cache, fc_relu, conv_shape = cache
        dpre = relu_backward(dfeats, fc_relu)
        dflat, dw, db = affine_backward(dpre, fc_cache)
        a.add_grad("glimpse.fc.w", dw)
        a.add_grad("glimpse.fc.b", db)
        dx = dflat.reshape(conv_shape)
        for i in reversed(range(len(self.conv_stack))):
            conv_cache, relu_cache = conv_caches[i]
            dy = relu_backward(dx, relu_cache)
            dx, dk, db = conv2d_backward(dy, conv_cache)
            a.add_grad(f"glimpse.conv{i}.w", dk)
            a.add_grad(f"glimpse.conv{i}.b", db)

    def action_step(self, feats: np.ndarray, h: np.ndarray, c: np.ndarray):
        """One recurrent step: features -> (logits, values, new h, new c)."""
        a = self.ps_action
        h2, c2, _ = lstm_forward(feats, h, c, a["action.lstm.w"], a["action.lstm.b"])
        logits, _ = affine_forward(h2, a["action.actor.w"], a["action.actor.b"])
        values, _ = affine_forward(h2, a["action.critic.w"], a["action.critic.b"])
        return logits, values[:, 0], h2, c2

    def location_step(self, feats: np.ndarray, prev_loc: np.ndarray, h: np.ndarray, c: np.ndarray):
        """One recurrent step of the location net -> (mean, new h, new c)."""
        g = self.ps_loc
        merged, _ = self._merge_forward(feats, prev_loc)
        h2, c2, _ = lstm_forward(merged, h, c, g["loc.lstm.w"], g["loc.lstm.b"])
        mean, _ = self._locator_forward(h2)
        return mean, h2, c2

    def _merge_forward(self, feats: np.ndarray, prev_loc: np.ndarray):
        g = self.ps_loc
        pre, feat_cache = affine_forward(prev_loc, g["loc.feat.w"], g["loc.feat.b"])
        lf, feat_relu = relu_forward(pre)
        joint = np.concatenate([feats, lf], axis=1)
        pre2, merge_cache = affine_forward(joint, g["loc.merge.w"], g["loc.merge.b"])
        merged, merge_relu = relu_forward(pre2)
        return merged, (feat_cache, feat_relu, merge_cache, merge_relu)

    def _merge_backward(self, dmerged: np.ndarray, cache):
        g = self.ps_loc
        feat_cache, feat_relu, merge_cache, merge_relu = cache
        dpre2 = relu_backward(dmerged, merge_relu)
        djoint, dw, db = affine_backward(dpre2, merge_cache)
        g.add_grad("loc.merge.w", dw)
        g.add_grad("loc.merge.b", db)
        nf = self.arch.glimpse_fc
        dfeats = djoint[:, :nf]
        dlf = djoint[:, nf:]
        dpre = relu_backward(dlf, feat_relu)
        _, dw, db = affine_backward(dpre, feat_cache)
        g.add_grad("loc.feat.w", dw)
        g.add_grad("loc.feat.b", db)
        return dfeats

    def _locator_forward(self, h: np.ndarray):
        g = self.ps_loc
        pre0, c0 = affine_forward(h, g["loc.head0.w"], g["loc.head0.b"])
        z, r0 = relu_forward(pre0)
        pre1, c1 = affine_forward(z, g["loc.head1.w"], g["loc.head1.b"])
        mean, t1 = tanh_forward(pre1)
        return mean, (c0, r0, c1, t1)

    def _locator_backward(self, dmean: np.ndarray, cache):
        g = self.ps_loc
        c0, r0, c1, t1 = cache
        dpre1 = tanh_backward(dmean, t1)
        dz, dw, db = affine_backward(dpre1, c1)
        g.add_grad("loc.head1.w", dw)
        g.add_grad("loc.head1.b", db)
        dpre0 = relu_backward(dz, r0)
        dh, dw, db = affine_backward(dpre0, c0)
        g.add_grad("loc.head0.w", dw)
        g.add_grad("loc.head0.b", db)
        return dh

    # ------------------------------------------------------------------
    # training replay over whole sequences

    def replay(
        self,
        glimpses: np.ndarray,
        prev_locs: np.ndarray,
        done_prev: np.ndarray,
        init_state: dict[str, np.ndarray],
        compute_loc: bool = True,
    ):
        """Recompute the forward pass over (T, B) stored steps with caches.

        done_prev[t] is 1 where step t-1 ended an episode, so recurrent state
        is zeroed before consuming step t. done_prev[0] must be all zeros:
        chunk-start states in init_state are already post-reset.
        """
        a = self.ps_action
        g = self.ps_loc
        t_len, bsz = glimpses.shape[:2]
        flat = glimpses.reshape(t_len * bsz, *glimpses.shape[2:])
        feats_flat, trunk_cache = self.features(flat)
        feats = feats_flat.reshape(t_len, bsz, -1)

        masks = (1.0 - done_prev).astype(feats.dtype)[:, :, None]
        h, c = init_state["h_a"].copy(), init_state["c_a"].copy()
        a_caches = []
        h_seq = np.empty((t_len, bsz, self.arch.lstm), dtype=feats.dtype)
        for t in range(t_len):
            if t:
                h = h * masks[t]
                c = c * masks[t]
            h, c, cache = lstm_forward(feats[t], h, c, a["action.lstm.w"], a["action.lstm.b"])
            a_caches.append(cache)
            h_seq[t] = h
        h_flat = h_seq.reshape(t_len * bsz, -1)
        logits, actor_cache = affine_forward(h_flat, a["action.actor.w"], a["action.actor.b"])
        values, critic_cache = affine_forward(h_flat, a["action.critic.w"], a["action.critic.b"])

        loc_ctx = None
        means = None
        if compute_loc:
            merged_flat, merge_cache = self._merge_forward(feats_flat, prev_locs.reshape(t_len * bsz, 2))
            merged = merged_flat.reshape(t_len, bsz, -1)
            hl, cl = init_state["h_l"].copy(), init_state["c_l"].copy()
            l_caches = []
            hl_seq = np.empty((t_len, bsz, self.arch.lstm), dtype=feats.dtype)
            for t in range(t_len):
                if t:
                    hl = hl * masks[t]
                    cl = cl * masks[t]
                hl, cl, cache = lstm_forward(merged[t], hl, cl, g["loc.lstm.w"], g["loc.lstm.b"])
                l_caches.append(cache)
                hl_seq[t] = hl
            mean_flat, locator_cache = self._locator_forward(hl_seq.reshape(t_len * bsz, -1))
            means = mean_flat.reshape(t_len, bsz, 2)
            loc_ctx = (merge_cache, l_caches, locator_cache)

        ctx = (trunk_cache, a_caches, actor_cache, critic_cache, loc_ctx, masks, (t_len, bsz))
        return (
            logits.reshape(t_len, bsz, self.action_count),
            values.reshape(t_len, bsz),
            means,
            ctx,
        )

    def replay_backward(self, ctx, dlogits: np.ndarray, dvalues: np.ndarray, dmeans) -> None:
        """Accumulate parameter gradients for a replayed minibatch."""
        trunk_cache, a_caches, actor_cache, critic_cache, loc_ctx, masks, (t_len, bsz) = ctx
        a = self.ps_action
        g = self.ps_loc

        dh_flat, dw, db = affine_backward(dlogits.reshape(t_len * bsz, -1), actor_cache)
        a.add_grad("action.actor.w", dw)
        a.add_grad("action.actor.b", db)
        dh2, dw, db = affine_backward(dvalues.reshape(t_len * bsz, 1), critic_cache)
        a.add_grad("action.critic.w", dw)
        a.add_grad("action.critic.b", db)
        dh_seq = (dh_flat + dh2).reshape(t_len, bsz, -1)

        dfeats = np.zeros((t_len, bsz, self.arch.glimpse_fc), dtype=dh_seq.dtype)
        carry_h = np.zeros_like(dh_seq[0])
        carry_c = np.zeros_like(dh_seq[0])
        dw_acc = np.zeros_like(a["action.lstm.w"])
        db_acc = np.zeros_like(a["action.lstm.b"])
        for t in reversed(range(t_len)):
            dx, carry_h, carry_c, dw, db = lstm_backward(dh_seq[t] + carry_h, carry_c, a_caches[t])
            dw_acc += dw
            db_acc += db
            dfeats[t] = dx
            if t:
                carry_h *= masks[t]
                carry_c *= masks[t]
        a.add_grad("action.lstm.w", dw_acc)
        a.add_grad("action.lstm.b", db_acc)

        if loc_ctx is not None:
            if dmeans is None:
                raise ValueError("replay computed location path but dmeans is missing")
            merge_cache, l_caches, locator_cache = loc_ctx
            dhl_flat = self._locator_backward(dmeans.reshape(t_len * bsz, 2), locator_cache)
            dhl_seq = dhl_flat.reshape(t_len, bsz, -1)
            dmerged = np.zeros((t_len, bsz, self.arch.merge), dtype=dhl_seq.dtype)
            carry_h = np.zeros_like(dhl_seq[0])
            carry_c = np.zeros_like(dhl_seq[0])
            dw_acc = np.zeros_like(g["loc.lstm.w"])
            db_acc = np.zeros_like(g["loc.lstm.b"])
            for t in reversed(range(t_len)):
                dx, carry_h, carry_c, dw, db = lstm_backward(dhl_seq[t] + carry_h, carry_c, l_caches[t])
                dw_acc += dw
                db_acc += db
                dmerged[t] = dx
                if t:
                    carry_h *= masks[t]
                    carry_c *= masks[t]
            g.add_grad("loc.lstm.w", dw_acc)
            g.add_grad("loc.lstm.b", db_acc)
            dfeats_from_loc = self._merge_backward(dmerged.reshape(t_len * bsz, -1), merge_cache)
            dfeats = dfeats + dfeats_from_loc.reshape(t_len, bsz, -1)

        self.features_backward(dfeats.reshape(t_len * bsz, -1), trunk_cache)

    # ------------------------------------------------------------------
    # single-environment interface

    def initial_state(self) -> AgentState:
        hid = self.arch.lstm
        z = lambda: np.zeros(hid, dtype=self.dtype)
        return AgentState(z(), z(), z(), z(), np.zeros(2, dtype=self.dtype))

    def initial_state_batch(self, n: int) -> dict:
        """Zeroed stacked recurrent state for n independent environments."""
        hid = self.arch.lstm
        return {
            "h_a": np.zeros((n, hid), dtype=self.dtype),
            "c_a": np.zeros((n, hid), dtype=self.dtype),
            "h_l": np.zeros((n, hid), dtype=self.dtype),
            "c_l": np.zeros((n, hid), dtype=self.dtype),
            "last_loc": np.zeros((n, 2), dtype=self.dtype),
        }

    def act_batch(
        self,
        frames,
        state: dict,
        mode: str = "sample",
        rng: np.random.Generator | None = None,
    ) -> tuple[dict, dict]:
        """Glimpse and advance n environments at once under shared parameters.

        frames is a sequence of 2-D frames, state a dict as produced by
        initial_state_batch. Returns (outputs, new_state); outputs carries the
        extracted glimpses so collection never recomputes them.
        """
        if mode not in ACT_MODES:
            raise ValueError(f"mode must be one of {ACT_MODES}, got {mode!r}")
        if mode != "greedy" and rng is None:
            raise ValueError(f"mode {mode!r} requires an rng")
        locs = state["last_loc"]
        glimpses = np.stack(
            [
                extract_glimpse(frame, (float(loc[0]), float(loc[1])), self.glimpse_cfg)
                for frame, loc in zip(frames, locs)
            ]
        ).astype(self.dtype)
        feats, _ = self.features(glimpses)
        logits, values, h_a, c_a = self.action_step(feats, state["h_a"], state["c_a"])
        logp = log_softmax(logits)
        n = logits.shape[0]
        if mode == "greedy":
            actions = np.argmax(logits, axis=1).astype(np.int64)
        else:
            actions = categorical_sample(logits, rng).astype(np.int64)
        action_logprob = logp[np.arange(n), actions].astype(np.float64)

        if mode == "random_loc":
            next_loc = rng.uniform(-1.0, 1.0, size=(n, 2))
            loc_logprob = np.full(n, uniform_logpdf(2))
            loc_mean = np.zeros((n, 2))
            h_l, c_l = state["h_l"], state["c_l"]
        else:
            mean, h_l, c_l = self.location_step(
                feats, locs.astype(self.dtype), state["h_l"], state["c_l"]
            )
            loc_mean = mean.astype(np.float64)
            if mode == "greedy":
                next_loc = loc_mean.copy()
            else:
                next_loc = truncnorm_sample(loc_mean, self.arch.locator_std, rng)
            loc_logprob = truncnorm_logpdf(next_loc, loc_mean, self.arch.locator_std)

        new_state = {
            "h_a": h_a,
            "c_a": c_a,
            "h_l": np.asarray(h_l),
            "c_l": np.asarray(c_l),
            "last_loc": next_loc.astype(self.dtype),
        }
        outputs = {
            "glimpse": glimpses,
            "action": actions,
            "action_logprob": action_logprob,
            "value": values.astype(np.float64),
            "next_loc": next_loc,
            "loc_logprob": np.asarray(loc_logprob, dtype=np.float64),
            "loc_mean": loc_mean,
        }
        return outputs, new_state

    def value_batch(self, frames, state: dict) -> np.ndarray:
        """Critic values for the next frames at the already-chosen locations.

        Reads but never advances the recurrent state; used to bootstrap
        truncated rollouts.
        """
        locs = state["last_loc"]
        glimpses = np.stack(
            [
                extract_glimpse(frame, (float(loc[0]), float(loc[1])), self.glimpse_cfg)
                for frame, loc in zip(frames, locs)
            ]
        ).astype(self.dtype)
        feats, _ = self.features(glimpses)
        _, values, _, _ = self.action_step(feats, state["h_a"], state["c_a"])
        return values.astype(np.float64)

    def act(
        self,
        frame: np.ndarray,
        state: AgentState,
        mode: str = "sample",
        rng: np.random.Generator | None = None,
    ) -> tuple[StepOutput, AgentState]:
        """Glimpse the frame at state.last_loc and advance one step."""
        batch = {
            "h_a": state.h_a[None],
            "c_a": state.c_a[None],
            "h_l": state.h_l[None],
            "c_l": state.c_l[None],
            "last_loc": state.last_loc[None],
        }
        outputs, ns = self.act_batch([frame], batch, mode, rng)
        new_state = AgentState(
            ns["h_a"][0], ns["c_a"][0], ns["h_l"][0], ns["c_l"][0], ns["last_loc"][0]
        )
        out = StepOutput(
            action=int(outputs["action"][0]),
            action_logprob=float(outputs["action_logprob"][0]),
            value=float(outputs["value"][0]),
            next_loc=outputs["next_loc"][0].copy(),
            loc_logprob=float(outputs["loc_logprob"][0]),
            loc_mean=outputs["loc_mean"][0],
        )
        return out, new_state

    # ------------------------------------------------------------------
    # accounting and serialization

    def param_count(self) -> int:
        return self.ps_action.count() + self.ps_loc.count()

    def flop_estimate(self) -> int:
        """Multiply-add count for one act() step at batch 1; frame-size free."""
        total = 0
        in_ch, side = self.glimpse_cfg.num_patches, self.glimpse_cfg.patch_size
        for (filters, k, stride), (_, h2, w2) in zip(self.conv_stack, self.conv_dims[1:]):
            total += 2 * filters * h2 * w2 * in_ch * k * k
            in_ch, side = filters, h2
        total += 2 * self.conv_flat * self.arch.glimpse_fc
        hid = self.arch.lstm
        total += 2 * 4 * hid * (self.arch.glimpse_fc + hid)
        total += 2 * hid * (self.action_count + 1)
        total += 2 * 2 * self.arch.loc_fc
        total += 2 * (self.arch.glimpse_fc + self.arch.loc_fc) * self.arch.merge
        total += 2 * 4 * hid * (self.arch.merge + hid)
        total += 2 * hid * self.arch.locator_hidden + 2 * self.arch.locator_hidden * 2
        return total

    def export_tensors(self, include_optimizer: bool = False) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for prefix, ps in (("action", self.ps_action), ("loc", self.ps_loc)):
            for name, arr in ps.params.items():
                out[f"{prefix}/{name}"] = arr
            if include_optimizer:
                for name in ps.params:
                    out[f"{prefix}/adam.m/{name}"] = ps.m[name]
                    out[f"{prefix}/adam.v/{name}"] = ps.v[name]
        return out

    def import_tensors(self, tensors: dict[str, np.ndarray], include_optimizer: bool = False) -> None:
        for prefix, ps in (("action", self.ps_action), ("loc", self.ps_loc)):
            for name, arr in ps.params.items():
                key = f"{prefix}/{name}"
                if key not in tensors:
                    raise KeyError(f"checkpoint missing tensor {key!r}")
                if tensors[key].shape != arr.shape:
                    raise ValueError(
                        f"tensor {key!r} shape {tensors[key].shape} does not match model {arr.shape}"
                    )
                arr[...] = tensors[key]
                if include_optimizer:
                    ps.m[name][...] = tensors[f"{prefix}/adam.m/{name}"]
                    ps.v[name][...] = tensors[f"{prefix}/adam.v/{name}"]

    def astype(self, dtype) -> "GbacAgent":
        """Copy with parameters cast to another dtype (float64 check mode)."""
        clone = GbacAgent(self.glimpse_cfg, self.arch, self.action_count, seed=0, dtype=dtype)
        for src, dst in ((self.ps_action, clone.ps_action), (self.ps_loc, clone.ps_loc)):
            for name, arr in src.params.items():
                dst.params[name][...] = arr
        return clone


def _lstm_bias(hidden: int) -> np.ndarray:
    """Zero bias except the forget gate, which starts open at +1."""
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return b
