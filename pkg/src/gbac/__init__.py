"""Glimpse-based actor-critic reinforcement learning.

A recurrent PPO agent that observes one small multi-resolution crop of each
frame and jointly learns what to do and where to look next. Trainable
parameter count is independent of frame size.
"""

__version__ = "0.1.0"
