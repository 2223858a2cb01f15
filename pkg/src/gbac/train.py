"""Training driver: rollout/update cycle, metrics CSV, checkpoints, resume.

Everything a run produces lands under its out_dir:

    config.json        resolved config echo (written before any compute)
    metrics.csv        one row per update, fixed column order
    ckpt_uNNNNNN.*     periodic checkpoints (every checkpoint_every updates)
    best.*             best rolling-100 episodic return so far
    final.*            written at completion, divergence, or Ctrl-C
    diagnostics.json   written only when training diverges

A single numpy Generator seeded from the run seed drives sampling and
minibatch shuffling sequentially, so single-threaded runs with equal seeds
are byte-identical (sps is forced to 0.0 in deterministic mode because wall
clock is the one non-deterministic column).
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections import deque

import numpy as np

from .agent import GbacAgent
from .config import ConfigError, RunConfig, config_digest, run_config_to_dict
from .envs import make_env
from .nn import load_checkpoint, save_checkpoint
from .ppo import RolloutBuffer, TrainingDivergedError, collect_rollout, update

logger = logging.getLogger("gbac")

METRICS_COLUMNS = (
    "global_step",
    "episodes",
    "episodic_return_mean_100",
    "policy_loss_a",
    "policy_loss_g",
    "value_loss",
    "entropy",
    "approx_kl_a",
    "approx_kl_g",
    "clip_frac_a",
    "clip_frac_g",
    "lr_a",
    "lr_g",
    "sps",
)

ROLLING_WINDOW = 100


def env_seed(run_seed: int, index: int, generation: int = 0) -> int:
    """Stable per-env seed; generation bumps on resume so episodes don't repeat."""
    return run_seed * 9973 + index + 7919 * generation


def make_training_env(cfg: RunConfig, index: int, generation: int = 0):
    seed = env_seed(cfg.seed, index, generation)
    if cfg.env.id == "bridge":
        from .bridge import BridgeEnv

        return BridgeEnv(cmd=cfg.env.bridge_cmd, addr=cfg.env.bridge_addr, seed=seed)
    return make_env(cfg.env.id, seed=seed)


def _close_env(env) -> None:
    close = getattr(env, "close", None)
    if close is not None:
        close()


def format_metric(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _checkpoint_extra(cfg, agent, rng, *, update_idx, global_step, rolling, best, generation,
                      episodes_done):
    # The echo drops out_dir so checkpoints are location-independent (and
    # byte-identical across reruns of one experiment in different directories);
    # the digest never covers out_dir either.
    echo = run_config_to_dict(cfg)
    del echo["out_dir"]
    return {
        "config": echo,
        "action_count": agent.action_count,
        "update": update_idx,
        "global_step": global_step,
        "episodes_done": episodes_done,
        "recent_returns": [float(r) for r in rolling],
        "best_return": best,
        "env_generation": generation,
        "adam_step_action": agent.ps_action.step,
        "adam_step_loc": agent.ps_loc.step,
        "rng_state": rng.bit_generator.state,
    }


def save_train_checkpoint(base, cfg, agent, rng, **extra_kwargs) -> None:
    save_checkpoint(
        base,
        agent.export_tensors(include_optimizer=True),
        config_digest(cfg),
        extra=_checkpoint_extra(cfg, agent, rng, **extra_kwargs),
    )


def latest_checkpoint(run_dir: str) -> str | None:
    """Base path of the most recent resumable checkpoint in run_dir, if any."""
    candidates = []
    for name in os.listdir(run_dir):
        if name.endswith(".json") and (name.startswith("ckpt_u") or name == "final.json"):
            base = name[: -len(".json")]
            if os.path.exists(os.path.join(run_dir, base + ".bin")):
                candidates.append(base)
    if not candidates:
        return None
    # final outranks any periodic checkpoint; otherwise highest update wins.
    if "final" in candidates:
        return os.path.join(run_dir, "final")
    return os.path.join(run_dir, sorted(candidates)[-1])


def _truncate_metrics(path: str, keep_rows: int) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines[: 1 + keep_rows])


def build_agent(cfg: RunConfig, action_count: int) -> GbacAgent:
    return GbacAgent(cfg.glimpse, cfg.arch, action_count=action_count, seed=cfg.seed)


def train_run(cfg: RunConfig, deterministic: bool = False, resume: bool = False) -> dict:
    """Run the full training loop; returns a summary dict.

    resume=True continues from the newest checkpoint in out_dir when one
    exists (fresh start otherwise). resume=False refuses to clobber a run
    directory that already holds a metrics.csv.
    """
    run_dir = cfg.out_dir
    os.makedirs(run_dir, exist_ok=True)
    metrics_path = os.path.join(run_dir, "metrics.csv")
    resume_base = latest_checkpoint(run_dir) if resume else None
    if not resume and os.path.exists(metrics_path):
        raise FileExistsError(
            f"{metrics_path} already exists; pass resume=True to continue or choose a new out_dir"
        )

    with open(os.path.join(run_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(run_config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

    batch = cfg.ppo.num_envs * cfg.ppo.num_steps
    total_updates = cfg.ppo.total_timesteps // batch
    if total_updates < 1:
        raise ValueError(
            f"total_timesteps {cfg.ppo.total_timesteps} is smaller than one "
            f"rollout batch ({batch})"
        )

    rng = np.random.default_rng(cfg.seed)
    rolling: deque = deque(maxlen=ROLLING_WINDOW)
    best_return = -float("inf")
    start_update = 0
    global_step = 0
    episodes_done = 0
    generation = 0

    probe = make_training_env(cfg, 0)
    action_count = probe.spec.action_count
    agent = build_agent(cfg, action_count)

    if resume_base is not None:
        tensors, manifest = load_checkpoint(resume_base)
        if manifest["config_digest"] != config_digest(cfg):
            raise ConfigError(
                f"checkpoint at {resume_base} belongs to a different config: "
                f"{manifest['config_digest']} != {config_digest(cfg)}"
            )
        extra = manifest["extra"]
        agent.import_tensors(tensors, include_optimizer=True)
        agent.ps_action.step = int(extra["adam_step_action"])
        agent.ps_loc.step = int(extra["adam_step_loc"])
        rng.bit_generator.state = extra["rng_state"]
        rolling.extend(extra["recent_returns"])
        best_return = float(extra["best_return"])
        start_update = int(extra["update"])
        global_step = int(extra["global_step"])
        episodes_done = int(extra["episodes_done"])
        generation = int(extra["env_generation"]) + 1
        if os.path.exists(metrics_path):
            _truncate_metrics(metrics_path, start_update)
        logger.info("resuming %s at update %d (step %d)", run_dir, start_update, global_step)

    if start_update >= total_updates:
        logger.info("run already complete at update %d", start_update)
        return {
            "run_dir": run_dir,
            "updates": start_update,
            "global_step": global_step,
            "rolling_mean": float(np.mean(rolling)) if rolling else float("nan"),
            "interrupted": False,
        }

    if generation != 0:
        _close_env(probe)
    envs = [probe if i == 0 and generation == 0 else make_training_env(cfg, i, generation)
            for i in range(cfg.ppo.num_envs)]
    frames = [env.reset() for env in envs]
    state = agent.initial_state_batch(cfg.ppo.num_envs)
    buffer = RolloutBuffer(cfg.ppo, agent)

    fresh_csv = resume_base is None or not os.path.exists(metrics_path)
    metrics_file = open(metrics_path, "w" if fresh_csv else "a", encoding="utf-8")
    ckpt_kwargs = dict(update_idx=start_update, global_step=global_step,
                       rolling=rolling, best=best_return, generation=generation,
                       episodes_done=episodes_done)
    interrupted = False
    try:
        if fresh_csv:
            metrics_file.write(",".join(METRICS_COLUMNS) + "\n")
            metrics_file.flush()
        for update_idx in range(start_update + 1, total_updates + 1):
            tick = time.perf_counter()
            infos = collect_rollout(
                agent, envs, state, frames, buffer, rng, mode=cfg.loc_mode
            )
            for ep in infos:
                rolling.append(float(ep["r"]))
            episodes_done += len(infos)
            global_step += batch
            metrics = update(agent, buffer, cfg.ppo, global_step, rng, mode=cfg.loc_mode)
            elapsed = time.perf_counter() - tick
            sps = 0.0 if deterministic else batch / max(elapsed, 1e-9)
            rolling_mean = float(np.mean(rolling)) if rolling else float("nan")
            row = {
                "global_step": global_step,
                "episodes": episodes_done,
                "episodic_return_mean_100": rolling_mean,
                "sps": sps,
                **metrics,
            }
            metrics_file.write(",".join(format_metric(row[c]) for c in METRICS_COLUMNS) + "\n")
            metrics_file.flush()
            ckpt_kwargs = dict(update_idx=update_idx, global_step=global_step,
                               rolling=rolling, best=best_return, generation=generation,
                               episodes_done=episodes_done)
            # "best" only counts once the window is full: the first few rows
            # average a handful of early-finishing (hence short, lucky)
            # episodes and read far higher than the policy's true level.
            if episodes_done >= ROLLING_WINDOW and rolling_mean > best_return:
                best_return = rolling_mean
                ckpt_kwargs["best"] = best_return
                save_train_checkpoint(os.path.join(run_dir, "best"), cfg, agent, rng, **ckpt_kwargs)
            if update_idx % cfg.checkpoint_every == 0 and update_idx < total_updates:
                save_train_checkpoint(
                    os.path.join(run_dir, f"ckpt_u{update_idx:06d}"), cfg, agent, rng, **ckpt_kwargs
                )
            if update_idx % 10 == 0 or update_idx == total_updates:
                logger.info(
                    "update %d/%d step %d return100 %.3f entropy %.3f",
                    update_idx, total_updates, global_step, rolling_mean, metrics["entropy"],
                )
    except KeyboardInterrupt:
        interrupted = True
        logger.warning("interrupted; flushing final checkpoint")
    except TrainingDivergedError as exc:
        diagnostics = {
            "error": str(exc),
            "update": ckpt_kwargs["update_idx"],
            "global_step": global_step,
            "recent_returns": [float(r) for r in rolling],
            "grad_norm_action": agent.ps_action.global_grad_norm(),
            "grad_norm_loc": agent.ps_loc.global_grad_norm(),
        }
        with open(os.path.join(run_dir, "diagnostics.json"), "w", encoding="utf-8") as fh:
            json.dump(diagnostics, fh, indent=2)
            fh.write("\n")
        save_train_checkpoint(os.path.join(run_dir, "final"), cfg, agent, rng, **ckpt_kwargs)
        raise
    finally:
        metrics_file.close()
        for env in envs:
            _close_env(env)

    save_train_checkpoint(os.path.join(run_dir, "final"), cfg, agent, rng, **ckpt_kwargs)
    return {
        "run_dir": run_dir,
        "updates": ckpt_kwargs["update_idx"],
        "global_step": global_step,
        "rolling_mean": float(np.mean(rolling)) if rolling else float("nan"),
        "interrupted": interrupted,
    }
