"""Command-line entry points: train, eval, heatmap, bridge-check, glimpse-debug, curve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .bridge import BridgeClient, BridgeError
from .config import (
    ConfigError,
    PRESET_NAMES,
    load_run_config,
    preset_config,
    run_config_from_dict,
    run_config_to_dict,
)
from .envs import make_env, preprocess
from .evaluate import EVAL_MODES, DigestMismatchError, evaluate_checkpoint
from .glimpse import GlimpseConfig, write_patch_pgms
from .heatmap import TraceError, heatmap_from_trace
from .ppo import TrainingDivergedError
from .train import METRICS_COLUMNS, train_run

logger = logging.getLogger("gbac")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_DIVERGED = 3

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def setup_logging() -> None:
    name = os.environ.get("GBAC_LOG", "info").lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"GBAC_LOG must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(
        level=LOG_LEVELS[name], format="%(asctime)s %(levelname)s %(message)s"
    )


def read_metrics_csv(path: str) -> dict[str, np.ndarray]:
    """Load a metrics file into named float columns."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def render_learning_curve(metrics_path: str, out_path: str) -> None:
    """Plot rolling episodic return and losses from a metrics file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = read_metrics_csv(metrics_path)
    for name in ("global_step", "episodic_return_mean_100", "value_loss", "entropy"):
        if name not in cols:
            raise ValueError(f"metrics file missing column {name!r}")
    steps = cols["global_step"]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4), constrained_layout=True)
    axes[0].plot(steps, cols["episodic_return_mean_100"], color="tab:blue")
    axes[0].set_title("rolling-100 episodic return")
    axes[1].plot(steps, cols["value_loss"], color="tab:orange")
    axes[1].set_title("value loss")
    axes[2].plot(steps, cols["entropy"], color="tab:green")
    axes[2].set_title("action entropy")
    for ax in axes:
        ax.set_xlabel("env steps")
        ax.grid(True, alpha=0.3)
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def cmd_train(args: argparse.Namespace) -> int:
    if args.config is not None:
        cfg = load_run_config(args.config)
        if args.seed is not None or args.out_dir is not None:
            data = run_config_to_dict(cfg)
            if args.seed is not None:
                data["seed"] = args.seed
            if args.out_dir is not None:
                data["out_dir"] = args.out_dir
            cfg = run_config_from_dict(data)
    else:
        cfg = preset_config(
            args.preset,
            env_id=args.env,
            total_timesteps=args.total_steps,
            seed=1 if args.seed is None else args.seed,
            out_dir=args.out_dir,
        )
    try:
        result = train_run(cfg, deterministic=args.deterministic, resume=args.resume)
    except TrainingDivergedError as exc:
        diag = os.path.join(cfg.out_dir, "diagnostics.json")
        print(f"training diverged: {exc}", file=sys.stderr)
        if os.path.exists(diag):
            print(f"diagnostics: {diag}", file=sys.stderr)
            print(open(diag, encoding="utf-8").read(), file=sys.stderr)
        return EXIT_DIVERGED
    metrics_path = os.path.join(result["run_dir"], "metrics.csv")
    curve_path = os.path.join(result["run_dir"], "learning_curve.png")
    try:
        render_learning_curve(metrics_path, curve_path)
    except Exception as exc:  # plotting must never invalidate a finished run
        logger.warning("learning-curve render failed: %s", exc)
    print(
        f"run_dir={result['run_dir']} updates={result['updates']} "
        f"global_step={result['global_step']} rolling_mean={result['rolling_mean']}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_checkpoint(
        args.ckpt,
        episodes=args.episodes,
        mode=args.mode,
        seed=args.seed,
        trace_path=args.trace,
        expected_digest=args.digest,
        report_path=args.report,
    )
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_heatmap(args: argparse.Namespace) -> int:
    summary = heatmap_from_trace(args.trace, args.h, args.w, args.out)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    metrics_path = os.path.join(args.run, "metrics.csv")
    if not os.path.exists(metrics_path):
        raise ConfigError(f"no metrics.csv under {args.run}")
    out = args.out or os.path.join(args.run, "learning_curve.png")
    render_learning_curve(metrics_path, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bridge_check(args: argparse.Namespace) -> int:
    """Soak a bridge server: handshake, then N random-action steps with frame checks."""
    client = BridgeClient(cmd=args.bridge_cmd, addr=args.bridge_addr, timeout=args.timeout)
    rng = np.random.default_rng(args.seed)
    try:
        spec = client.handshake(seed=args.seed)
        print(
            f"spec: id={spec.id} frame={spec.frame_h}x{spec.frame_w} "
            f"actions={spec.action_count} max_episode_steps={spec.max_episode_steps}"
        )
        h, w = spec.frame_h, spec.frame_w
        episodes = 0
        done = True
        for step in range(args.steps):
            if done:
                frame = client.reset(args.seed + episodes, h, w)
                episodes += 1
            action = int(rng.integers(spec.action_count))
            frame, reward, done = client.step(action, h, w)
            if not np.isfinite(reward):
                print(f"non-finite reward {reward} at step {step}", file=sys.stderr)
                return EXIT_RUNTIME
        print(f"ok: {args.steps} steps, {episodes} episodes, zero framing errors")
        return EXIT_OK
    finally:
        client.close()


def parse_loc(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"loc must be 'x,y', got {text!r}")
    x, y = (float(p) for p in parts)
    if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
        raise ConfigError(f"loc must lie in [-1,1]^2, got ({x}, {y})")
    return x, y


def cmd_glimpse_debug(args: argparse.Namespace) -> int:
    env = make_env(args.env, seed=args.seed)
    frame = preprocess(env.reset())
    cfg = GlimpseConfig(num_patches=args.patches, patch_size=args.size, scale=args.scale)
    loc = parse_loc(args.loc)
    paths = write_patch_pgms(frame, loc, cfg, args.out)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbac",
        description="Glimpse-based actor-critic: train, evaluate, and inspect agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent and write run artifacts")
    src = p_train.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a run-config JSON file")
    src.add_argument("--preset", choices=PRESET_NAMES, help="named preset instead of a file")
    p_train.add_argument("--env", help="env id for --preset (e.g. seekdot, minipong)")
    p_train.add_argument("--total-steps", type=int, help="total env steps for --preset")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--out-dir", help="override the run directory")
    p_train.add_argument(
        "--deterministic", action="store_true",
        help="pin throughput columns so same-seed runs are byte-identical",
    )
    p_train.add_argument("--resume", action="store_true", help="continue from latest checkpoint")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--ckpt", required=True, help="checkpoint base path (no extension)")
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.add_argument("--mode", choices=EVAL_MODES, default="greedy")
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--trace", help="write a per-step trace CSV here")
    p_eval.add_argument("--report", help="write the JSON report here")
    p_eval.add_argument("--digest", help="expected config digest (refuses on mismatch)")
    p_eval.set_defaults(func=cmd_eval)

    p_heat = sub.add_parser("heatmap", help="accumulate glimpse centers from a trace")
    p_heat.add_argument("--trace", required=True)
    p_heat.add_argument("--h", type=int, required=True)
    p_heat.add_argument("--w", type=int, required=True)
    p_heat.add_argument("--out", required=True, help="output base path (writes .pgm/.csv/.png)")
    p_heat.set_defaults(func=cmd_heatmap)

    p_curve = sub.add_parser("curve", help="render the learning curve for a run directory")
    p_curve.add_argument("--run", required=True)
    p_curve.add_argument("--out", help="PNG path (default: <run>/learning_curve.png)")
    p_curve.set_defaults(func=cmd_curve)

    p_check = sub.add_parser("bridge-check", help="soak-test an external env server")
    ep = p_check.add_mutually_exclusive_group(required=True)
    ep.add_argument("--bridge-cmd", help="command line to launch a stdio server")
    ep.add_argument("--bridge-addr", help="host:port of a TCP server")
    p_check.add_argument("--steps", type=int, default=1000)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--timeout", type=float, default=30.0)
    p_check.set_defaults(func=cmd_bridge_check)

    p_gd = sub.add_parser("glimpse-debug", help="write glimpse patches for one frame as PGM")
    p_gd.add_argument("--env", required=True)
    p_gd.add_argument("--seed", type=int, default=0)
    p_gd.add_argument("--loc", default="0,0", help="glimpse center as 'x,y' in [-1,1]")
    p_gd.add_argument("--patches", type=int, default=2)
    p_gd.add_argument("--size", type=int, default=16)
    p_gd.add_argument("--scale", type=int, default=2)
    p_gd.add_argument("--out", required=True, help="output base path")
    p_gd.set_defaults(func=cmd_glimpse_debug)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging()
        if args.command == "train" and args.config is None:
            if args.env is None or args.total_steps is None:
                parser.error("--preset requires --env and --total-steps")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DigestMismatchError, TraceError, FileExistsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
