"""Toy environments and frame preprocessing.

Two dependency-free games drive training and tests end to end: a scaled-down
pong (64x64, three actions) and a cursor-seeks-target task (96x96, five
actions). Both are pure integer state machines, so a seed plus an action
sequence fully determines every frame, reward, and episode boundary on any
platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """Static facts about an environment instance."""

    id: str
    frame_h: int
    frame_w: int
    action_count: int
    max_episode_steps: int
    seed: int

    def __post_init__(self):
        if self.action_count < 2:
            raise ValueError(f"action_count must be >= 2, got {self.action_count}")


@dataclass(frozen=True)
class EnvStep:
    """One transition: the new frame, its reward, and episode bookkeeping.

    info is None mid-episode; on the terminal step it carries
    {"episode": {"r": total_return, "l": length}}.
    """

    frame: np.ndarray
    reward: float
    done: bool
    info: Optional[dict] = None


def _episode_info(total_return: float, length: int) -> dict:
    return {"episode": {"r": float(total_return), "l": int(length)}}


class MiniPong:
    """Two-paddle pong on a 64x64 grid, agent on the right.

    Actions: 0 noop, 1 up, 2 down. The agent paddle moves 3 px/step; the
    opponent tracks the ball at up to 2 px/step, but only once the ball is
    inside its reaction zone (left fifth of the court) and moving toward it,
    which is what makes it beatable. The ball moves 2 px/step horizontally
    and -2..2 (never 0) vertically; every paddle bounce re-draws the vertical
    speed from the environment's own generator, so rallies stay varied while
    remaining seed-deterministic. Serves always head toward the agent with
    full spin, so a parked paddle concedes reliably while any tracking policy
    has time to line up. Reward is +1 when the opponent misses, -1 when the
    agent misses. An episode ends after 5 total points or 1000 steps.
    """

    HEIGHT = 64
    WIDTH = 64
    PADDLE_H = 8
    PADDLE_W = 2
    BALL = 2
    AGENT_X = 61
    OPP_X = 1
    AGENT_SPEED = 3
    OPP_SPEED = 2
    REACT_X = 20
    BALL_VX = 2
    VY_CHOICES = (-2, -1, 1, 2)
    POINTS_PER_EPISODE = 5
    MAX_STEPS = 1000

    def __init__(self, seed: int = 0):
        self.spec = EnvSpec(
            id="minipong",
            frame_h=self.HEIGHT,
            frame_w=self.WIDTH,
            action_count=3,
            max_episode_steps=self.MAX_STEPS,
            seed=seed,
        )
        self._rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, options: Optional[dict] = None) -> np.ndarray:
        center = (self.HEIGHT - self.PADDLE_H) // 2
        self._agent_y = center
        self._opp_y = center
        self._points = 0
        self._steps = 0
        self._return = 0.0
        self._serve()
        return self._render()

    def _serve(self):
        """Put the ball back in play, heading toward the agent with full spin."""
        self._ball_x = (self.WIDTH - self.BALL) // 2
        self._ball_y = int(self._rng.integers(2, self.HEIGHT - self.BALL - 2))
        self._vx = self.BALL_VX
        self._vy = 2 if self._rng.integers(0, 2) else -2

    def step(self, action: int) -> EnvStep:
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"invalid action {action} for {self.spec.id}")
        self._steps += 1

        if action == 1:
            self._agent_y -= self.AGENT_SPEED
        elif action == 2:
            self._agent_y += self.AGENT_SPEED
        self._agent_y = int(np.clip(self._agent_y, 0, self.HEIGHT - self.PADDLE_H))

        # The opponent only reacts while the ball is closing in on it.
        if self._vx < 0 and self._ball_x < self.REACT_X:
            target = self._ball_y + self.BALL // 2 - self.PADDLE_H // 2
            delta = int(np.clip(target - self._opp_y, -self.OPP_SPEED, self.OPP_SPEED))
            self._opp_y = int(np.clip(self._opp_y + delta, 0, self.HEIGHT - self.PADDLE_H))

        self._ball_x += self._vx
        self._ball_y += self._vy
        top_max = self.HEIGHT - self.BALL
        if self._ball_y < 0:
            self._ball_y = -self._ball_y
            self._vy = -self._vy
        elif self._ball_y > top_max:
            self._ball_y = 2 * top_max - self._ball_y
            self._vy = -self._vy

        reward = 0.0
        if self._vx > 0 and self._ball_x + self.BALL - 1 >= self.AGENT_X:
            if self._overlaps(self._agent_y):
                self._ball_x = self.AGENT_X - self.BALL
                self._vx = -self.BALL_VX
                self._redraw_vy()
            else:
                reward = -1.0
                self._points += 1
                self._serve()
        elif self._vx < 0 and self._ball_x <= self.OPP_X + self.PADDLE_W - 1:
            if self._overlaps(self._opp_y):
                self._ball_x = self.OPP_X + self.PADDLE_W
                self._vx = self.BALL_VX
                self._redraw_vy()
            else:
                reward = 1.0
                self._points += 1
                self._serve()

        self._return += reward
        done = self._points >= self.POINTS_PER_EPISODE or self._steps >= self.MAX_STEPS
        info = _episode_info(self._return, self._steps) if done else None
        return EnvStep(self._render(), reward, done, info)

    def _redraw_vy(self):
        self._vy = int(self.VY_CHOICES[self._rng.integers(0, len(self.VY_CHOICES))])

    def _overlaps(self, paddle_y: int) -> bool:
        return (
            self._ball_y + self.BALL - 1 >= paddle_y
            and self._ball_y <= paddle_y + self.PADDLE_H - 1
        )

    def _render(self) -> np.ndarray:
        frame = np.zeros((self.HEIGHT, self.WIDTH), dtype=np.float32)
        frame[self._opp_y : self._opp_y + self.PADDLE_H, self.OPP_X : self.OPP_X + self.PADDLE_W] = 1.0
        frame[
            self._agent_y : self._agent_y + self.PADDLE_H,
            self.AGENT_X : self.AGENT_X + self.PADDLE_W,
        ] = 1.0
        bx = int(np.clip(self._ball_x, 0, self.WIDTH - self.BALL))
        frame[self._ball_y : self._ball_y + self.BALL, bx : bx + self.BALL] = 1.0
        return frame


class SeekDot:
    """Steer a 6x6 cursor onto a bright 4x4 target on a 96x96 frame.

    Actions: 0 up, 1 down, 2 left, 3 right, 4 noop, each moving the cursor
    8 px. Touching the target ends the episode with +1; every other step
    costs 0.01; episodes are capped at 200 steps. Play happens inside a
    walled arena inset 16 px from the frame edge: the target is placed
    uniformly at random within the arena each episode (never overlapping
    the spawn) and the cursor stops at the walls.
    reset(options={"target": (row, col)}) pins the target for tests.
    """

    SIZE = 96
    TARGET = 4
    CURSOR = 6
    # The arena wall. Keeping play inside the central 64x64 region means a
    # single medium-zoom glimpse can take in the whole arena at once, which
    # is the point of this task: reward attention for settling somewhere
    # useful without demanding a search over the frame. The 16 px border is
    # inert and stays black.
    WALL = 16
    # Dim enough that block-averaged peripheral views keep the two blobs
    # apart by brightness alone: the cursor pools to ~0.1-0.2 while the
    # target's 1.0 smears to ~0.25-1.0 depending on alignment, so "which
    # blob is which" stays linearly separable after pooling. Brighter
    # cursors (0.5+) land in the target's pooled range and force the
    # readout to distinguish a 1.5-texel blob from a 1-texel blob — which
    # small conv stacks cannot do reliably at this resolution.
    CURSOR_VALUE = 0.2
    # 8 px per move keeps overlap skip-proof (consecutive 6x6 footprints
    # leave a 2 px gap the 4 px target cannot hide in, and the 9 px-wide
    # touch band per axis exceeds the 8 px lattice), while undirected motion
    # covers the board well inside the 200-step cap — terminal rewards stay
    # frequent enough for learning within a smoke-test budget.
    STEP_PX = 8
    STEP_PENALTY = -0.01
    MAX_STEPS = 200

    def __init__(self, seed: int = 0):
        self.spec = EnvSpec(
            id="seekdot",
            frame_h=self.SIZE,
            frame_w=self.SIZE,
            action_count=5,
            max_episode_steps=self.MAX_STEPS,
            seed=seed,
        )
        self._rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, options: Optional[dict] = None) -> np.ndarray:
        self._cur_r = (self.SIZE - self.CURSOR) // 2
        self._cur_c = (self.SIZE - self.CURSOR) // 2
        self._steps = 0
        self._return = 0.0
        lo, hi = self.WALL, self.SIZE - self.WALL - self.TARGET
        if options and "target" in options:
            tr, tc = options["target"]
            if not (lo <= tr <= hi and lo <= tc <= hi):
                raise ValueError(f"target {(tr, tc)} outside the arena")
            self._tgt_r, self._tgt_c = int(tr), int(tc)
        else:
            while True:
                self._tgt_r = int(self._rng.integers(lo, hi + 1))
                self._tgt_c = int(self._rng.integers(lo, hi + 1))
                if not self._touching():
                    break
        return self._render()

    def step(self, action: int) -> EnvStep:
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"invalid action {action} for {self.spec.id}")
        self._steps += 1
        if self._touching():
            # Only reachable from a pinned overlapping spawn.
            self._return += 1.0
            return EnvStep(self._render(), 1.0, True, _episode_info(self._return, self._steps))

        if action == 0:
            self._cur_r -= self.STEP_PX
        elif action == 1:
            self._cur_r += self.STEP_PX
        elif action == 2:
            self._cur_c -= self.STEP_PX
        elif action == 3:
            self._cur_c += self.STEP_PX
        lo, hi = self.WALL, self.SIZE - self.WALL - self.CURSOR
        self._cur_r = int(np.clip(self._cur_r, lo, hi))
        self._cur_c = int(np.clip(self._cur_c, lo, hi))

        if self._touching():
            self._return += 1.0
            return EnvStep(self._render(), 1.0, True, _episode_info(self._return, self._steps))
        self._return += self.STEP_PENALTY
        done = self._steps >= self.MAX_STEPS
        info = _episode_info(self._return, self._steps) if done else None
        return EnvStep(self._render(), self.STEP_PENALTY, done, info)

    def _touching(self) -> bool:
        return (
            self._cur_r <= self._tgt_r + self.TARGET - 1
            and self._tgt_r <= self._cur_r + self.CURSOR - 1
            and self._cur_c <= self._tgt_c + self.TARGET - 1
            and self._tgt_c <= self._cur_c + self.CURSOR - 1
        )

    def _render(self) -> np.ndarray:
        frame = np.zeros((self.SIZE, self.SIZE), dtype=np.float32)
        frame[
            self._cur_r : self._cur_r + self.CURSOR, self._cur_c : self._cur_c + self.CURSOR
        ] = self.CURSOR_VALUE
        frame[
            self._tgt_r : self._tgt_r + self.TARGET, self._tgt_c : self._tgt_c + self.TARGET
        ] = 1.0
        return frame


ENV_REGISTRY = {"minipong": MiniPong, "seekdot": SeekDot}


def make_env(env_id: str, seed: int = 0):
    """Instantiate a registered environment by id."""
    if env_id not in ENV_REGISTRY:
        known = ", ".join(sorted(ENV_REGISTRY))
        raise ValueError(f"unknown env id {env_id!r} (known: {known})")
    return ENV_REGISTRY[env_id](seed=seed)


def preprocess(frame_raw: np.ndarray) -> np.ndarray:
    """Convert a raw frame to float32 grayscale in [0, 1], preserving dims.

    Accepts 2-D grayscale or 3-D H x W x 3 color, as uint8 in [0, 255] or
    floats already in [0, 1]. Color collapses via luma weights
    0.299/0.587/0.114. No resizing ever happens here.
    """
    arr = np.asarray(frame_raw)
    if arr.ndim == 3:
        if arr.shape[2] != 3:
            raise ValueError(f"expected 3 color channels, got shape {arr.shape}")
    elif arr.ndim != 2:
        raise ValueError(f"expected 2-D or 3-D frame, got shape {arr.shape}")

    if arr.dtype == np.uint8:
        scaled = arr.astype(np.float32) / np.float32(255.0)
    elif np.issubdtype(arr.dtype, np.floating):
        if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
            raise ValueError("float frame values must lie in [0, 1]")
        scaled = arr.astype(np.float32)
    else:
        raise ValueError(f"unknown pixel format {arr.dtype}")

    if scaled.ndim == 3:
        weights = np.array([0.299, 0.587, 0.114], dtype=np.float32)
        scaled = scaled @ weights
    return scaled.astype(np.float32)
