"""Policy evaluation: load a checkpoint, roll episodes, report, trace.

The checkpoint manifest carries the full config echo; its digest is recomputed
on load so a tampered config or a checkpoint/config mismatch is refused with
both digests in the error message.
"""

from __future__ import annotations

import json
import logging
import os

import numpy as np

from .agent import GbacAgent
from .config import RunConfig, config_digest, run_config_from_dict
from .nn import load_checkpoint
from .train import build_agent, make_training_env

logger = logging.getLogger("gbac")

EVAL_MODES = ("greedy", "sample", "random_loc")
TRACE_COLUMNS = ("episode", "t", "x", "y", "action", "reward")


class DigestMismatchError(ValueError):
    def __init__(self, message: str, expected: str, actual: str):
        super().__init__(f"{message}: expected digest {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


def load_eval_agent(base: str, expected_digest: str | None = None):
    """Rebuild the agent (policy weights only) recorded at checkpoint base.

    Returns (agent, run config, manifest). The config echo inside the manifest
    must hash to the manifest's own digest, and to expected_digest if given.
    """
    tensors, manifest = load_checkpoint(base)
    stored = manifest["config_digest"]
    echo = dict(manifest["extra"]["config"])
    # Checkpoints are location-independent: the echo omits out_dir, so any
    # artifacts produced from this load default next to the checkpoint itself.
    echo.setdefault("out_dir", os.path.dirname(os.path.abspath(base)))
    cfg = run_config_from_dict(echo)
    recomputed = config_digest(cfg)
    if recomputed != stored:
        raise DigestMismatchError(
            f"checkpoint {base} config echo does not hash to its recorded digest",
            stored,
            recomputed,
        )
    if expected_digest is not None and expected_digest != stored:
        raise DigestMismatchError(
            f"checkpoint {base} belongs to a different config", expected_digest, stored
        )
    agent = build_agent(cfg, int(manifest["extra"]["action_count"]))
    agent.import_tensors(tensors, include_optimizer=False)
    return agent, cfg, manifest


def evaluate_agent(
    agent: GbacAgent,
    env,
    episodes: int,
    mode: str = "greedy",
    seed: int = 0,
    trace_path: str | None = None,
) -> dict:
    """Roll `episodes` full episodes on env; returns the report dict.

    The trace file, when requested, holds one row per step: the episode index,
    step index, chosen glimpse center (x, y in [-1, 1]), action, and reward.
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    if episodes < 0:
        raise ValueError(f"episodes must be >= 0, got {episodes}")
    rng = np.random.default_rng(seed)
    returns: list[float] = []
    lengths: list[int] = []
    trace_file = None
    if trace_path is not None:
        trace_file = open(trace_path, "w", encoding="utf-8")
        trace_file.write(",".join(TRACE_COLUMNS) + "\n")
    try:
        for episode in range(episodes):
            frame = env.reset()
            state = agent.initial_state_batch(1)
            ep_return = 0.0
            t = 0
            while True:
                out, state = agent.act_batch([frame], state, mode, rng)
                step = env.step(int(out["action"][0]))
                ep_return += float(step.reward)
                if trace_file is not None:
                    x, y = float(out["next_loc"][0, 0]), float(out["next_loc"][0, 1])
                    trace_file.write(
                        f"{episode},{t},{x!r},{y!r},{int(out['action'][0])},{float(step.reward)!r}\n"
                    )
                t += 1
                if step.done:
                    break
                frame = step.frame
            returns.append(ep_return)
            lengths.append(t)
            logger.debug("episode %d: return %.3f length %d", episode, ep_return, t)
    finally:
        if trace_file is not None:
            trace_file.close()
    arr = np.asarray(returns, dtype=np.float64)
    report = {
        "episodes": episodes,
        "mode": mode,
        "mean": float(arr.mean()) if episodes else None,
        "std": float(arr.std()) if episodes else None,
        "min": float(arr.min()) if episodes else None,
        "max": float(arr.max()) if episodes else None,
        "returns": [float(r) for r in returns],
        "episode_lengths": lengths,
    }
    return report


def evaluate_checkpoint(
    base: str,
    episodes: int,
    mode: str = "greedy",
    seed: int | None = None,
    trace_path: str | None = None,
    expected_digest: str | None = None,
    report_path: str | None = None,
) -> dict:
    """End-to-end eval entry: checkpoint -> env -> report (optionally saved)."""
    agent, cfg, _ = load_eval_agent(base, expected_digest)
    env = make_training_env(cfg, index=0, generation=10_000 + (seed or 0))
    try:
        report = evaluate_agent(
            agent, env, episodes, mode=mode,
            seed=cfg.seed if seed is None else seed, trace_path=trace_path,
        )
    finally:
        close = getattr(env, "close", None)
        if close is not None:
            close()
    report["checkpoint"] = os.path.abspath(base)
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return report
