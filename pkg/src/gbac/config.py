"""Run configuration: strict JSON schema, named presets, canonical digest.

A run config is a single JSON document with five sections (env, glimpse, arch,
ppo) plus run-level scalars. Parsing is strict: unknown keys are rejected with
their full field path, and every section's own invariants are checked before
any compute starts. The canonical sha256 digest of the resolved config ties
checkpoints to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .agent import ArchConfig
from .glimpse import GlimpseConfig
from .ppo import PPOConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration content; message names the field path."""


@dataclass(frozen=True)
class EnvConfig:
    id: str
    bridge_cmd: str | None = None
    bridge_addr: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("env.id must be a non-empty string")
        if self.id == "bridge":
            if bool(self.bridge_cmd) == bool(self.bridge_addr):
                raise ValueError(
                    "env.id 'bridge' needs exactly one of env.bridge_cmd or env.bridge_addr"
                )
        elif self.bridge_cmd or self.bridge_addr:
            raise ValueError("env.bridge_cmd/bridge_addr are only valid with env.id 'bridge'")


LOC_MODES = ("sample", "random_loc")


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    glimpse: GlimpseConfig
    arch: ArchConfig
    ppo: PPOConfig
    seed: int
    out_dir: str
    eval_episodes: int = 100
    loc_mode: str = "sample"
    checkpoint_every: int = 20

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not self.out_dir:
            raise ValueError("out_dir must be a non-empty string")
        if self.eval_episodes < 0:
            raise ValueError(f"eval_episodes must be >= 0, got {self.eval_episodes}")
        if self.loc_mode not in LOC_MODES:
            raise ValueError(f"loc_mode must be one of {LOC_MODES}, got {self.loc_mode!r}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")


# ---------------------------------------------------------------------------
# strict dict -> dataclass parsing

_MISSING = object()


def _check_unknown(data: dict, allowed: tuple[str, ...], path: str) -> None:
    for key in data:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key: {where}")


def _get(data: dict, key: str, kinds, path: str, default=_MISSING):
    where = f"{path}.{key}" if path else key
    if key not in data:
        if default is _MISSING:
            raise ConfigError(f"missing required key: {where}")
        return default
    value = data[key]
    # bool is an int subclass; never let flags masquerade as numbers or vice versa.
    if bool in kinds:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{where} must not be a boolean, got {value!r}")
    if not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{where} must be {names}, got {type(value).__name__} {value!r}")
    return float(value) if kinds == (int, float) else value


def _section(data: dict, key: str, path: str = "") -> dict:
    value = data.get(key, _MISSING)
    if value is _MISSING:
        raise ConfigError(f"missing required section: {key}")
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object, got {type(value).__name__}")
    return value


def _build(cls, kwargs: dict, path: str):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_env(data: dict) -> EnvConfig:
    _check_unknown(data, ("id", "bridge_cmd", "bridge_addr"), "env")
    kwargs = {
        "id": _get(data, "id", (str,), "env"),
        "bridge_cmd": _get(data, "bridge_cmd", (str, type(None)), "env", None),
        "bridge_addr": _get(data, "bridge_addr", (str, type(None)), "env", None),
    }
    return _build(EnvConfig, kwargs, "env")


def _parse_glimpse(data: dict) -> GlimpseConfig:
    _check_unknown(data, ("num_patches", "patch_size", "scale"), "glimpse")
    kwargs = {
        "num_patches": _get(data, "num_patches", (int,), "glimpse"),
        "patch_size": _get(data, "patch_size", (int,), "glimpse"),
        "scale": _get(data, "scale", (int,), "glimpse", 2),
    }
    return _build(GlimpseConfig, kwargs, "glimpse")


def _parse_conv_stack(value, path: str):
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be null or a non-empty list of [filters, kernel, stride]")
    stack = []
    for i, layer in enumerate(value):
        if (
            not isinstance(layer, list)
            or len(layer) != 3
            or any(isinstance(v, bool) or not isinstance(v, int) for v in layer)
        ):
            raise ConfigError(f"{path}[{i}] must be [filters, kernel, stride] integers")
        stack.append(tuple(layer))
    return tuple(stack)


_ARCH_KEYS = (
    "glimpse_fc", "loc_fc", "lstm", "merge", "locator_hidden", "locator_std", "conv_stack",
)


def _parse_arch(data: dict) -> ArchConfig:
    _check_unknown(data, _ARCH_KEYS, "arch")
    defaults = ArchConfig()
    kwargs = {
        name: _get(data, name, (int,), "arch", getattr(defaults, name))
        for name in ("glimpse_fc", "loc_fc", "lstm", "merge", "locator_hidden")
    }
    kwargs["locator_std"] = _get(data, "locator_std", (int, float), "arch", defaults.locator_std)
    kwargs["conv_stack"] = _parse_conv_stack(data.get("conv_stack"), "arch.conv_stack")
    return _build(ArchConfig, kwargs, "arch")


_PPO_INT_KEYS = ("total_timesteps", "num_envs", "num_steps", "minibatches", "k_epochs")
_PPO_FLOAT_KEYS = (
    "gamma", "gae_lambda", "clip_action", "clip_loc", "vf_coef", "ent_coef",
    "lr_action", "lr_loc", "max_grad_norm",
)
_PPO_FLAG_KEYS = ("anneal_lr", "norm_adv", "clip_vloss", "clip_rewards")


def _parse_ppo(data: dict) -> PPOConfig:
    _check_unknown(data, _PPO_INT_KEYS + _PPO_FLOAT_KEYS + _PPO_FLAG_KEYS, "ppo")
    defaults = PPOConfig(total_timesteps=1)
    kwargs = {"total_timesteps": _get(data, "total_timesteps", (int,), "ppo")}
    for name in _PPO_INT_KEYS[1:]:
        kwargs[name] = _get(data, name, (int,), "ppo", getattr(defaults, name))
    for name in _PPO_FLOAT_KEYS:
        kwargs[name] = _get(data, name, (int, float), "ppo", getattr(defaults, name))
    for name in _PPO_FLAG_KEYS:
        kwargs[name] = _get(data, name, (bool,), "ppo", getattr(defaults, name))
    return _build(PPOConfig, kwargs, "ppo")


_TOP_KEYS = (
    "env", "glimpse", "arch", "ppo", "seed", "out_dir",
    "eval_episodes", "loc_mode", "checkpoint_every",
)


def run_config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    _check_unknown(data, _TOP_KEYS, "")
    kwargs = {
        "env": _parse_env(_section(data, "env")),
        "glimpse": _parse_glimpse(_section(data, "glimpse")),
        "arch": _parse_arch(_section(data, "arch")),
        "ppo": _parse_ppo(_section(data, "ppo")),
        "seed": _get(data, "seed", (int,), ""),
        "out_dir": _get(data, "out_dir", (str,), ""),
        "eval_episodes": _get(data, "eval_episodes", (int,), "", 100),
        "loc_mode": _get(data, "loc_mode", (str,), "", "sample"),
        "checkpoint_every": _get(data, "checkpoint_every", (int,), "", 20),
    }
    return _build(RunConfig, kwargs, "run")


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return run_config_from_dict(data)


def run_config_to_dict(cfg: RunConfig) -> dict:
    conv = cfg.arch.conv_stack
    return {
        "env": {
            "id": cfg.env.id,
            "bridge_cmd": cfg.env.bridge_cmd,
            "bridge_addr": cfg.env.bridge_addr,
        },
        "glimpse": {
            "num_patches": cfg.glimpse.num_patches,
            "patch_size": cfg.glimpse.patch_size,
            "scale": cfg.glimpse.scale,
        },
        "arch": {
            "glimpse_fc": cfg.arch.glimpse_fc,
            "loc_fc": cfg.arch.loc_fc,
            "lstm": cfg.arch.lstm,
            "merge": cfg.arch.merge,
            "locator_hidden": cfg.arch.locator_hidden,
            "locator_std": cfg.arch.locator_std,
            "conv_stack": None if conv is None else [list(layer) for layer in conv],
        },
        "ppo": {
            "total_timesteps": cfg.ppo.total_timesteps,
            "gamma": cfg.ppo.gamma,
            "gae_lambda": cfg.ppo.gae_lambda,
            "clip_action": cfg.ppo.clip_action,
            "clip_loc": cfg.ppo.clip_loc,
            "vf_coef": cfg.ppo.vf_coef,
            "ent_coef": cfg.ppo.ent_coef,
            "lr_action": cfg.ppo.lr_action,
            "lr_loc": cfg.ppo.lr_loc,
            "num_envs": cfg.ppo.num_envs,
            "num_steps": cfg.ppo.num_steps,
            "minibatches": cfg.ppo.minibatches,
            "k_epochs": cfg.ppo.k_epochs,
            "anneal_lr": cfg.ppo.anneal_lr,
            "norm_adv": cfg.ppo.norm_adv,
            "clip_vloss": cfg.ppo.clip_vloss,
            "clip_rewards": cfg.ppo.clip_rewards,
        },
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "eval_episodes": cfg.eval_episodes,
        "loc_mode": cfg.loc_mode,
        "checkpoint_every": cfg.checkpoint_every,
    }


def config_digest(cfg: RunConfig) -> str:
    """sha256 over the canonical (sorted-key, compact) JSON of the config.

    out_dir is excluded: it says where a run is written, not what the run is,
    and identical experiments in different directories must share a digest.
    """
    data = run_config_to_dict(cfg)
    del data["out_dir"]
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# presets
#
# The paired published values land in atari_like/carracing_like; desk is the
# small-scale preset tuned for the two built-in toy environments.

PRESET_NAMES = ("atari_like", "carracing_like", "desk")


def preset_dict(
    name: str,
    env_id: str,
    total_timesteps: int,
    seed: int = 1,
    out_dir: str | None = None,
    loc_mode: str = "sample",
) -> dict:
    """A complete config dict for a named preset; tweak then parse."""
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    env: dict = {"id": env_id, "bridge_cmd": None, "bridge_addr": None}
    base = {
        "seed": seed,
        "out_dir": out_dir or f"runs/{name}-{env_id.replace('/', '_')}-s{seed}",
        "eval_episodes": 100,
        "loc_mode": loc_mode,
        "env": env,
    }
    if name == "atari_like":
        return {
            **base,
            "glimpse": {"num_patches": 3, "patch_size": 40, "scale": 2},
            "arch": {
                "glimpse_fc": 384, "loc_fc": 256, "lstm": 128, "merge": 768,
                "locator_hidden": 256, "locator_std": 0.1, "conv_stack": None,
            },
            "ppo": {
                "total_timesteps": total_timesteps,
                "clip_action": 0.1, "ent_coef": 0.01, "lr_action": 2.5e-4,
                "num_envs": 8, "num_steps": 128, "minibatches": 4, "k_epochs": 4,
                "clip_rewards": True,
            },
            "checkpoint_every": 50,
        }
    if name == "carracing_like":
        return {
            **base,
            "glimpse": {"num_patches": 2, "patch_size": 40, "scale": 2},
            "arch": {
                "glimpse_fc": 512, "loc_fc": 256, "lstm": 128, "merge": 768,
                "locator_hidden": 256, "locator_std": 0.1, "conv_stack": None,
            },
            "ppo": {
                "total_timesteps": total_timesteps,
                "clip_action": 0.2, "ent_coef": 0.0, "lr_action": 3e-4,
                "num_envs": 1, "num_steps": 2048, "minibatches": 32, "k_epochs": 10,
                "clip_rewards": False,
            },
            "checkpoint_every": 10,
        }
    # The peripheral patch must cover a useful share of the board: the toy
    # envs differ in frame size (96 vs 64), so the desk preset widens the
    # pyramid per env the same way the full presets size glimpses per suite.
    desk_scale = 4 if env_id == "seekdot" else 3
    return {
        **base,
        "glimpse": {"num_patches": 2, "patch_size": 16, "scale": desk_scale},
        "arch": {
            # Steering needs the trunk to encode *relative* blob positions;
            # narrower trunks (192-256) stay at chance on that readout even
            # with supervised labels, so the desk preset keeps the full width.
            "glimpse_fc": 512, "loc_fc": 64, "lstm": 128, "merge": 256,
            # A tight glimpse spread: the toy boards fit inside one well-placed
            # peripheral view, so placement needs precision more than search.
            "locator_hidden": 64, "locator_std": 0.1, "conv_stack": None,
        },
        "ppo": {
            "total_timesteps": total_timesteps,
            # The desk nets are two orders of magnitude smaller than the full
            # presets and train for a fraction of the steps, so they need a
            # much larger step size to move at all within the budget.  The toy
            # tasks pay a single terminal reward after short episodes, so
            # credit is concentrated on the last ~10 decisive steps (lower
            # gamma/lambda), exploration is kept alive longer (higher entropy
            # bonus), and the step size stays constant for the whole run.
            "gamma": 0.98, "gae_lambda": 0.9,
            "clip_action": 0.2, "ent_coef": 0.02, "lr_action": 2.5e-3, "lr_loc": 3e-4,
            "num_envs": 8, "num_steps": 128, "minibatches": 4, "k_epochs": 4,
            "anneal_lr": False, "clip_rewards": False,
        },
        "checkpoint_every": 20,
    }


def preset_config(
    name: str,
    env_id: str,
    total_timesteps: int,
    seed: int = 1,
    out_dir: str | None = None,
    loc_mode: str = "sample",
) -> RunConfig:
    return run_config_from_dict(
        preset_dict(name, env_id, total_timesteps, seed, out_dir, loc_mode)
    )
