"""ORCA half-plane velocity constraints, one per nearby agent.

Constraint convention: a velocity ``u`` is admissible for a half-plane
when ``normal @ u + offset >= 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rlorca.dynamics import DEFAULT_DT, OutputObs, VehicleGeom
from rlorca.errors import DegenerateGeometryError, DomainError

log = logging.getLogger(__name__)

# rotation applied per agent index when two agents share a position
_COINCIDENT_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class HalfPlane:
    normal: np.ndarray
    offset: float

    def value(self, u) -> float:
        return float(self.normal @ np.asarray(u, float) + self.offset)

    def admits(self, u, tol: float = 0.0) -> bool:
        return self.value(u) >= -tol


@dataclass(frozen=True)
class OrcaConfig:
    horizon_T: float = 2.0
    max_neighbors_K: int = 10
    v_max: float = 2.0
    radius_inflation: float = 1.1

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise DomainError("horizon_T must be positive")
        if self.max_neighbors_K < 1:
            raise DomainError("max_neighbors_K must be at least 1")
        if self.radius_inflation < 1:
            raise DomainError("radius_inflation must be >= 1")

    @property
    def cutoff(self) -> float:
        return 2.0 * self.v_max * self.horizon_T


def neighbor_indices(own: OutputObs, others: Sequence[OutputObs], cfg: OrcaConfig) -> list[int]:
    """Indices into `others` of the K closest agents inside the cutoff distance."""
    cutoff = cfg.cutoff
    cand = []
    for idx, o in enumerate(others):
        d = math.hypot(o.pos[0] - own.pos[0], o.pos[1] - own.pos[1])
        if d <= cutoff:
            cand.append((d, idx))
    cand.sort()  # (distance, index) pairs: ties fall back to input order
    return [idx for _, idx in cand[: cfg.max_neighbors_K]]


def select_neighbors(own: OutputObs, others: Sequence[OutputObs], cfg: OrcaConfig) -> list[OutputObs]:
    return [others[i] for i in neighbor_indices(own, others, cfg)]


def halfplane_for_pair(
    own: OutputObs,
    other: OutputObs,
    combined_radius: float,
    T: float,
    time_step: float = DEFAULT_DT,
) -> HalfPlane:
    """Reciprocal half-plane for `own` against `other`.

    Truncated velocity-obstacle construction; already-overlapping agents
    get a disc that separates them within one `time_step`.
    """
    if not (combined_radius > 0 and T > 0 and time_step > 0):
        raise DomainError("combined_radius, T and time_step must be positive")
    px = float(other.pos[0] - own.pos[0])
    py = float(other.pos[1] - own.pos[1])
    vx = float(own.vel[0] - other.vel[0])
    vy = float(own.vel[1] - other.vel[1])
    dist_sq = px * px + py * py
    if dist_sq == 0.0:
        raise DegenerateGeometryError("coincident agent positions")
    r = combined_radius
    r_sq = r * r

    if dist_sq > r_sq:
        inv_t = 1.0 / T
        wx, wy = vx - inv_t * px, vy - inv_t * py
        w_sq = wx * wx + wy * wy
        dot1 = wx * px + wy * py
        if w_sq == 0.0:
            # relative velocity sits on the cutoff centre: push back along -p_rel
            dist = math.sqrt(dist_sq)
            nx, ny = -px / dist, -py / dist
            ux, uy = r * inv_t * nx, r * inv_t * ny
        elif dot1 < 0.0 and dot1 * dot1 > r_sq * w_sq:
            # closest boundary point is on the cutoff arc
            w_len = math.sqrt(w_sq)
            nx, ny = wx / w_len, wy / w_len
            ux, uy = (r * inv_t - w_len) * nx, (r * inv_t - w_len) * ny
        else:
            leg = math.sqrt(dist_sq - r_sq)
            if px * wy - py * wx > 0.0:
                dx = (px * leg - py * r) / dist_sq
                dy = (px * r + py * leg) / dist_sq
            else:
                dx = -(px * leg + py * r) / dist_sq
                dy = -(-px * r + py * leg) / dist_sq
            dot2 = vx * dx + vy * dy
            ux, uy = dot2 * dx - vx, dot2 * dy - vy
            nx, ny = -dy, dx
    else:
        inv_dt = 1.0 / time_step
        wx, wy = vx - inv_dt * px, vy - inv_dt * py
        w_len = math.hypot(wx, wy)
        if w_len == 0.0:
            dist = math.sqrt(dist_sq)
            nx, ny = -px / dist, -py / dist
        else:
            nx, ny = wx / w_len, wy / w_len
        ux, uy = (r * inv_dt - w_len) * nx, (r * inv_dt - w_len) * ny

    point_x = float(own.vel[0]) + 0.5 * ux
    point_y = float(own.vel[1]) + 0.5 * uy
    return HalfPlane(np.array([nx, ny]), -(nx * point_x + ny * point_y))


def constraints_for_agent(
    own: OutputObs,
    others: Sequence[OutputObs],
    geom: VehicleGeom,
    cfg: OrcaConfig,
    time_step: float = DEFAULT_DT,
    agent_index: int = 0,
) -> list[HalfPlane]:
    """One half-plane per selected neighbor, using the inflated combined radius."""
    combined = cfg.radius_inflation * 2.0 * geom.radius
    planes = []
    for other in select_neighbors(own, others, cfg):
        try:
            planes.append(halfplane_for_pair(own, other, combined, cfg.horizon_T, time_step))
        except DegenerateGeometryError:
            angle = agent_index * _COINCIDENT_ANGLE
            log.warning("agent %d coincides with a neighbor; separating along %.3f rad", agent_index, angle)
            shifted = OutputObs(
                pos=own.pos + 1e-9 * np.array([math.cos(angle), math.sin(angle)]),
                vel=other.vel,
            )
            planes.append(halfplane_for_pair(own, shifted, combined, cfg.horizon_T, time_step))
    return planes
