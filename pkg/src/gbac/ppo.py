"""Dual-policy PPO: rollout collection, advantage estimation, clipped updates.

One trainer drives two clipped surrogate losses that share a single backward
pass: the action policy (with an entropy bonus) and the glimpse-location
policy (without one). Advantages are shared, the value loss is clipped, and
recurrent credit assignment replays whole stored sequences from their saved
LSTM states instead of treating steps as independent samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agent import GbacAgent
from .nn import adam_step, categorical_backward, categorical_stats
from .truncnorm import truncnorm_logpdf, truncnorm_logpdf_dmean


class TrainingDivergedError(RuntimeError):
    """Raised when a loss component stops being finite."""


@dataclass(frozen=True)
class PPOConfig:
    """Optimization hyperparameters; see field defaults for the usual values."""

    total_timesteps: int
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_action: float = 0.1
    clip_loc: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    lr_action: float = 2.5e-4
    lr_loc: float = 3e-5
    num_envs: int = 8
    num_steps: int = 128
    minibatches: int = 4
    k_epochs: int = 4
    anneal_lr: bool = True
    norm_adv: bool = True
    clip_vloss: bool = True
    max_grad_norm: float = 0.5
    clip_rewards: bool = False

    def __post_init__(self):
        positive = (
            ("total_timesteps", self.total_timesteps),
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_action", self.clip_action),
            ("clip_loc", self.clip_loc),
            ("lr_action", self.lr_action),
            ("lr_loc", self.lr_loc),
            ("num_envs", self.num_envs),
            ("num_steps", self.num_steps),
            ("minibatches", self.minibatches),
            ("k_epochs", self.k_epochs),
            ("max_grad_norm", self.max_grad_norm),
        )
        for name, value in positive:
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name, value in (("gamma", self.gamma), ("gae_lambda", self.gae_lambda)):
            if value > 1.0:
                raise ValueError(f"{name} must be at most 1, got {value}")
        for name, value in (("vf_coef", self.vf_coef), ("ent_coef", self.ent_coef)):
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if self.clip_action >= 1.0 or self.clip_loc >= 1.0:
            raise ValueError(
                f"clip coefficients must be below 1, got action {self.clip_action} "
                f"loc {self.clip_loc}"
            )
        batch = self.num_envs * self.num_steps
        if batch % self.minibatches:
            raise ValueError(
                f"num_envs*num_steps ({batch}) must be divisible by minibatches "
                f"({self.minibatches})"
            )
        if self.num_envs % self.minibatches and self.minibatches % self.num_envs:
            raise ValueError(
                "minibatches must divide num_envs (whole-sequence minibatching) or "
                f"be a multiple of it (time-chunked), got {self.minibatches} vs "
                f"{self.num_envs} envs"
            )
        if self.num_steps % self.chunks_per_env:
            raise ValueError(
                f"num_steps ({self.num_steps}) must be divisible by chunks per env "
                f"({self.chunks_per_env})"
            )

    @property
    def chunks_per_env(self) -> int:
        """How many LSTM-replay segments each env's rollout splits into."""
        if self.num_envs % self.minibatches == 0:
            return 1
        return self.minibatches // self.num_envs

    @property
    def chunk_len(self) -> int:
        return self.num_steps // self.chunks_per_env

    @property
    def total_chunks(self) -> int:
        return self.num_envs * self.chunks_per_env


class RolloutBuffer:
    """Fixed-size arrays holding one rollout of num_steps x num_envs records.

    Glimpses are stored instead of frames so updates replay exactly what the
    agent saw. LSTM states are snapshotted at every chunk boundary during
    collection, which is what lets minibatches replay segments independently.
    """

    def __init__(self, cfg: PPOConfig, agent: GbacAgent):
        t, n = cfg.num_steps, cfg.num_envs
        g = agent.glimpse_cfg
        hid = agent.arch.lstm
        self.cfg = cfg
        self.glimpses = np.zeros((t, n, g.num_patches, g.patch_size, g.patch_size), dtype=np.float32)
        self.prev_locs = np.zeros((t, n, 2), dtype=np.float32)
        self.actions = np.zeros((t, n), dtype=np.int64)
        self.logp_a = np.zeros((t, n), dtype=np.float64)
        self.locs = np.zeros((t, n, 2), dtype=np.float64)
        self.logp_g = np.zeros((t, n), dtype=np.float64)
        self.values = np.zeros((t, n), dtype=np.float64)
        self.rewards = np.zeros((t, n), dtype=np.float64)
        self.dones = np.zeros((t, n), dtype=np.float64)
        self.chunk_states = {
            key: np.zeros((cfg.chunks_per_env, n, hid), dtype=np.float32)
            for key in ("h_a", "c_a", "h_l", "c_l")
        }
        self.bootstrap = np.zeros(n, dtype=np.float64)


def compute_gae(rewards, values, dones, bootstrap_value, gamma, lam):
    """Masked backward recursion over the rollout.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    returns = A + V. done_t flags that the state after step t was terminal.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    t_max = rewards.shape[0]
    adv = np.zeros_like(rewards)
    lastgae = np.zeros_like(np.asarray(bootstrap_value, dtype=np.float64))
    for t in reversed(range(t_max)):
        nonterminal = 1.0 - dones[t]
        next_values = bootstrap_value if t == t_max - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        lastgae = delta + gamma * lam * nonterminal * lastgae
        adv[t] = lastgae
    return adv, adv + values


def clipped_policy_loss_grad(logp_new, logp_old, advantages, eps):
    """Clipped surrogate loss with its gradient and ratio diagnostics.

    Returns (loss, dloss/dlogp_new, approx_kl, clip_frac). The gradient is
    zero wherever the clipped branch is active and smaller, which is the whole
    point of the clip.
    """
    logp_new = np.asarray(logp_new, dtype=np.float64)
    logp_old = np.asarray(logp_old, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    logratio = logp_new - logp_old
    ratio = np.exp(logratio)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    per_sample = -np.minimum(unclipped, clipped)
    loss = float(per_sample.mean())
    live = unclipped <= clipped
    grad = np.where(live, -advantages * ratio, 0.0) / per_sample.size
    approx_kl = float(np.mean(ratio - 1.0 - logratio))
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > eps))
    return loss, grad, approx_kl, clip_frac


def clipped_policy_loss(logp_new, logp_old, advantages, eps) -> float:
    return clipped_policy_loss_grad(logp_new, logp_old, advantages, eps)[0]


def clipped_value_loss_grad(v_new, v_old, returns, eps, clip: bool = True):
    """Half squared error against returns, optionally pessimistically clipped.

    Returns (loss, dloss/dv_new).
    """
    v_new = np.asarray(v_new, dtype=np.float64)
    v_old = np.asarray(v_old, dtype=np.float64)
    returns = np.asarray(returns, dtype=np.float64)
    if not clip:
        diff = v_new - returns
        return float(0.5 * np.mean(diff * diff)), diff / diff.size
    unclipped_sq = (v_new - returns) ** 2
    v_clipped = v_old + np.clip(v_new - v_old, -eps, eps)
    clipped_sq = (v_clipped - returns) ** 2
    loss = float(0.5 * np.mean(np.maximum(unclipped_sq, clipped_sq)))
    use_unclipped = unclipped_sq >= clipped_sq
    inside = np.abs(v_new - v_old) <= eps
    grad = np.where(use_unclipped, v_new - returns, np.where(inside, v_clipped - returns, 0.0))
    return loss, grad / v_new.size


def clipped_value_loss(v_new, v_old, returns, eps) -> float:
    return clipped_value_loss_grad(v_new, v_old, returns, eps)[0]


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + eps)


def anneal_lr(lr0: float, global_step: int, total_timesteps: int) -> float:
    """Linear decay from lr0 to exactly 0 at total_timesteps."""
    frac = 1.0 - global_step / total_timesteps
    return lr0 * max(0.0, frac)


def total_objective(
    pl_action: float,
    pl_loc: float,
    value_loss: float,
    entropy: float,
    vf_coef: float,
    ent_coef: float,
) -> float:
    """Combine the components; raises naming the first non-finite one."""
    parts = {
        "policy_loss_a": pl_action,
        "policy_loss_g": pl_loc,
        "value_loss": value_loss,
        "entropy": entropy,
    }
    for name, value in parts.items():
        if not math.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss component {name}: {value}")
    return pl_action + pl_loc + vf_coef * value_loss - ent_coef * entropy


def collect_rollout(
    agent: GbacAgent,
    envs: list,
    state: dict,
    frames: list,
    buffer: RolloutBuffer,
    rng: np.random.Generator,
    mode: str = "sample",
):
    """Fill the buffer by stepping every env num_steps times.

    state/frames are the live per-env carry between rollouts and are mutated
    in place (auto-reset zeroes a finished env's recurrent state and recenters
    its glimpse location). Returns the episode tallies that completed.
    """
    cfg = buffer.cfg
    episode_infos = []
    for t in range(cfg.num_steps):
        if t % cfg.chunk_len == 0:
            k = t // cfg.chunk_len
            for key in buffer.chunk_states:
                buffer.chunk_states[key][k] = state[key]
        buffer.prev_locs[t] = state["last_loc"]
        out, new_state = agent.act_batch(frames, state, mode, rng)
        buffer.glimpses[t] = out["glimpse"]
        buffer.actions[t] = out["action"]
        buffer.logp_a[t] = out["action_logprob"]
        buffer.locs[t] = out["next_loc"]
        buffer.logp_g[t] = out["loc_logprob"]
        buffer.values[t] = out["value"]
        state.update(new_state)
        for i, env in enumerate(envs):
            try:
                step = env.step(int(out["action"][i]))
            except Exception as exc:
                raise RuntimeError(f"env {i} failed at rollout step {t}: {exc}") from exc
            reward = float(np.sign(step.reward)) if cfg.clip_rewards else float(step.reward)
            buffer.rewards[t, i] = reward
            buffer.dones[t, i] = float(step.done)
            if step.done:
                if step.info and "episode" in step.info:
                    episode_infos.append(step.info["episode"])
                frames[i] = env.reset()
                for key in ("h_a", "c_a", "h_l", "c_l", "last_loc"):
                    state[key][i] = 0.0
            else:
                frames[i] = step.frame
    buffer.bootstrap[:] = agent.value_batch(frames, state)
    return episode_infos


def minibatch_indices(cfg: PPOConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """One epoch's partition of chunk indices into minibatches."""
    perm = rng.permutation(cfg.total_chunks)
    per = cfg.total_chunks // cfg.minibatches
    return [perm[i * per : (i + 1) * per] for i in range(cfg.minibatches)]


def _gather_chunks(buffer: RolloutBuffer, chunk_ids: np.ndarray):
    """Stack the selected chunks as independent columns of one minibatch.

    Chunk j covers env (j % num_envs) over steps [seg*chunk_len, ...) with
    seg = j // num_envs. Returns per-chunk slices plus each chunk's stored
    initial LSTM state and its replay done mask.
    """
    cfg = buffer.cfg
    clen = cfg.chunk_len
    cols = len(chunk_ids)
    envs_idx = chunk_ids % cfg.num_envs
    segs = chunk_ids // cfg.num_envs

    def take(arr):
        out = np.stack(
            [arr[seg * clen : (seg + 1) * clen, env] for seg, env in zip(segs, envs_idx)],
            axis=1,
        )
        return out

    done_prev = np.zeros((clen, cols), dtype=np.float64)
    dones = take(buffer.dones)
    done_prev[1:] = dones[:-1]
    init_state = {
        key: np.stack([buffer.chunk_states[key][seg, env] for seg, env in zip(segs, envs_idx)])
        for key in buffer.chunk_states
    }
    return {
        "glimpses": take(buffer.glimpses),
        "prev_locs": take(buffer.prev_locs),
        "actions": take(buffer.actions),
        "logp_a": take(buffer.logp_a),
        "locs": take(buffer.locs),
        "logp_g": take(buffer.logp_g),
        "values": take(buffer.values),
        "done_prev": done_prev,
        "init_state": init_state,
    }


def update(
    agent: GbacAgent,
    buffer: RolloutBuffer,
    cfg: PPOConfig,
    global_step: int,
    rng: np.random.Generator,
    mode: str = "sample",
) -> dict:
    """Run k_epochs of minibatch updates over the rollout; returns metrics.

    Every minibatch does one replay, one combined backward for both policy
    losses, the value loss, and the entropy bonus, then steps the trunk+action
    optimizer and the location optimizer. In random_loc mode the location
    policy has no parameters in play, so its loss and optimizer are skipped.
    """
    lr_a = anneal_lr(cfg.lr_action, global_step, cfg.total_timesteps) if cfg.anneal_lr else cfg.lr_action
    lr_g = anneal_lr(cfg.lr_loc, global_step, cfg.total_timesteps) if cfg.anneal_lr else cfg.lr_loc
    advantages, returns = compute_gae(
        buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap, cfg.gamma, cfg.gae_lambda
    )
    if not np.isfinite(advantages).all():
        raise TrainingDivergedError("non-finite advantages after GAE")
    use_loc = mode != "random_loc"
    sums = {
        key: 0.0
        for key in (
            "policy_loss_a",
            "policy_loss_g",
            "value_loss",
            "entropy",
            "approx_kl_a",
            "approx_kl_g",
            "clip_frac_a",
            "clip_frac_g",
        )
    }
    n_batches = 0
    for _ in range(cfg.k_epochs):
        for chunk_ids in minibatch_indices(cfg, rng):
            mb = _gather_chunks(buffer, chunk_ids)
            clen, cols = mb["actions"].shape
            m = clen * cols
            adv = np.stack(
                [
                    advantages[seg * cfg.chunk_len : (seg + 1) * cfg.chunk_len, env]
                    for seg, env in zip(chunk_ids // cfg.num_envs, chunk_ids % cfg.num_envs)
                ],
                axis=1,
            )
            ret = np.stack(
                [
                    returns[seg * cfg.chunk_len : (seg + 1) * cfg.chunk_len, env]
                    for seg, env in zip(chunk_ids // cfg.num_envs, chunk_ids % cfg.num_envs)
                ],
                axis=1,
            )
            if cfg.norm_adv:
                adv = normalize_advantages(adv)

            logits, values, means, ctx = agent.replay(
                mb["glimpses"], mb["prev_locs"], mb["done_prev"], mb["init_state"], compute_loc=use_loc
            )
            flat_logits = logits.reshape(m, -1)
            flat_actions = mb["actions"].reshape(m)
            chosen_logp, entropies, cat_cache = categorical_stats(flat_logits, flat_actions)
            entropy = float(entropies.mean())

            pl_a, dchosen, kl_a, frac_a = clipped_policy_loss_grad(
                chosen_logp, mb["logp_a"].reshape(m), adv.reshape(m), cfg.clip_action
            )
            if use_loc:
                logp_g_new = truncnorm_logpdf(mb["locs"], means, agent.arch.locator_std)
                pl_g, dlogp_g, kl_g, frac_g = clipped_policy_loss_grad(
                    logp_g_new.reshape(m), mb["logp_g"].reshape(m), adv.reshape(m), cfg.clip_loc
                )
            else:
                pl_g, kl_g, frac_g = 0.0, 0.0, 0.0
            vloss, dvalues = clipped_value_loss_grad(
                values.reshape(m), mb["values"].reshape(m), ret.reshape(m), cfg.clip_action,
                clip=cfg.clip_vloss,
            )
            loss = total_objective(pl_a, pl_g, vloss, entropy, cfg.vf_coef, cfg.ent_coef)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite total loss {loss}")

            dlogits = categorical_backward(
                dchosen, np.full(m, -cfg.ent_coef / m), cat_cache
            ).reshape(clen, cols, -1)
            dvals = (cfg.vf_coef * dvalues).reshape(clen, cols)
            if use_loc:
                dmean_unit = truncnorm_logpdf_dmean(
                    mb["locs"], means.astype(np.float64), agent.arch.locator_std
                )
                dmeans = (dlogp_g.reshape(clen, cols, 1) * dmean_unit).astype(agent.dtype)
            else:
                dmeans = None
            agent.ps_action.zero_grads()
            agent.ps_loc.zero_grads()
            agent.replay_backward(
                ctx, dlogits.astype(agent.dtype), dvals.astype(agent.dtype), dmeans
            )
            adam_step(agent.ps_action, lr_a, max_grad_norm=cfg.max_grad_norm)
            if use_loc:
                adam_step(agent.ps_loc, lr_g, max_grad_norm=cfg.max_grad_norm)

            sums["policy_loss_a"] += pl_a
            sums["policy_loss_g"] += pl_g
            sums["value_loss"] += vloss
            sums["entropy"] += entropy
            sums["approx_kl_a"] += kl_a
            sums["approx_kl_g"] += kl_g
            sums["clip_frac_a"] += frac_a
            sums["clip_frac_g"] += frac_g
            n_batches += 1
    metrics = {key: value / n_batches for key, value in sums.items()}
    metrics["lr_a"] = lr_a
    metrics["lr_g"] = lr_g if use_loc else 0.0
    for key, value in metrics.items():
        if not math.isfinite(value):
            raise TrainingDivergedError(f"non-finite metric {key}: {value}")
    return metrics
