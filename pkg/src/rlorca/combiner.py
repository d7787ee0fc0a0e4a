"""Blend per-neighbor policy actions by pseudo-distance weights.

Neighbors that are close, or that are heading toward the ego agent, get
larger weights. The pseudo-distance shrinks the component of the
relative position along the neighbor's velocity by exp(-beta * speed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rlorca.dynamics import ActionCmd
from rlorca.errors import DomainError, PreconditionError


@dataclass(frozen=True)
class CombinerConfig:
    alpha: float = 1.0
    beta_w: float = 0.4
    v_eps: float = 1e-6
    d_floor: float = 1e-3

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta_w > 0 and self.v_eps > 0 and self.d_floor > 0):
            raise DomainError(f"combiner parameters must be positive: {self}")

    @property
    def max_weight(self) -> float:
        return weight(self.d_floor, self.alpha)


def pseudo_distance(p_rel, v_j, cfg: CombinerConfig = CombinerConfig()) -> float:
    """Pseudo-distance from neighbor j to the ego agent.

    `p_rel` is the ego position relative to the neighbor (p_i - p_j), so
    `p_rel @ v_j >= 0` means the neighbor is moving toward the ego agent.
    """
    px, py = float(p_rel[0]), float(p_rel[1])
    vx, vy = float(v_j[0]), float(v_j[1])
    dot = px * vx + py * vy
    speed = math.hypot(vx, vy)
    if dot < 0.0 or speed <= cfg.v_eps:
        return math.hypot(px, py)
    cross = px * vy - py * vx
    gamma = math.exp(-cfg.beta_w * speed)
    return math.sqrt((cross * cross + (gamma * dot) ** 2) / (speed * speed))


def weight(D: float, alpha: float) -> float:
    if not D > 0:
        raise DomainError(f"weight needs a positive distance, got {D}")
    return math.exp(-alpha * D) / D


def neighbor_weight(p_rel, v_j, cfg: CombinerConfig = CombinerConfig()) -> float:
    """Weight of one neighbor, with the pseudo-distance clamped at `d_floor`."""
    return weight(max(pseudo_distance(p_rel, v_j, cfg), cfg.d_floor), cfg.alpha)


def combine_array(actions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    actions = np.asarray(actions, float)
    weights = np.asarray(weights, float)
    if actions.ndim != 2 or len(actions) == 0 or len(actions) != len(weights):
        raise PreconditionError("combine needs matching, non-empty actions and weights")
    if np.any(weights <= 0):
        raise PreconditionError("combination weights must be positive")
    mixed = (weights[:, None] * actions).sum(axis=0) / weights.sum()
    # rounding must not push the mean outside the inputs' hull
    return np.clip(mixed, actions.min(axis=0), actions.max(axis=0))


def combine(actions: Sequence[ActionCmd], weights: Sequence[float]) -> ActionCmd:
    arr = np.array([[a.accel, a.steer] for a in actions], dtype=float).reshape(-1, 2)
    return ActionCmd.from_array(combine_array(arr, np.asarray(weights, float)))
