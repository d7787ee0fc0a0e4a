"""Discrete-time kinematic bicycle model.

State is (x, y, psi, v) plus the last applied action. Actions are
(accel, steer) with steer the front wheel angle. The model is integrated
with forward Euler; the observed velocity points along psi + beta where
beta is the slip angle of the most recent steering command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rlorca.errors import DomainError, PreconditionError

DEFAULT_DT = 0.05
_BOX_TOL = 1e-12


@dataclass(frozen=True)
class ActionCmd:
    accel: float = 0.0
    steer: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.accel, self.steer], dtype=float)

    @classmethod
    def from_array(cls, a) -> "ActionCmd":
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    psi: float
    v: float
    last_action: ActionCmd = field(default_factory=ActionCmd)


@dataclass(frozen=True)
class VehicleGeom:
    l_f: float = 0.5
    l_r: float = 0.5
    radius: float = 0.5

    def __post_init__(self):
        if not (self.l_f > 0 and self.l_r > 0 and self.radius > 0):
            raise DomainError(f"vehicle geometry must be positive: {self}")


@dataclass(frozen=True)
class VehicleLimits:
    """Action box and speed box shared by all agents."""

    accel_min: float = -1.0
    accel_max: float = 1.0
    steer_max: float = 0.6
    v_min: float = 0.0
    v_max: float = 2.0

    def __post_init__(self):
        if not self.accel_min < self.accel_max:
            raise DomainError("accel_min must be below accel_max")
        if not 0 < self.steer_max < math.pi / 2:
            raise DomainError("steer_max must lie in (0, pi/2)")
        if not self.v_min <= self.v_max:
            raise DomainError("v_min must not exceed v_max")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.accel_min, -self.steer_max])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.accel_max, self.steer_max])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def contains(self, action: ActionCmd, tol: float = _BOX_TOL) -> bool:
        return (
            self.accel_min - tol <= action.accel <= self.accel_max + tol
            and -self.steer_max - tol <= action.steer <= self.steer_max + tol
        )


DEFAULT_GEOM = VehicleGeom()
DEFAULT_LIMITS = VehicleLimits()


@dataclass(frozen=True)
class OutputObs:
    """What other agents see: position and velocity."""

    pos: np.ndarray
    vel: np.ndarray


@dataclass(frozen=True)
class VelocityLinearization:
    """Affine model next_vel ~= A_v @ action + b_v."""

    A_v: np.ndarray
    b_v: np.ndarray

    def __call__(self, action) -> np.ndarray:
        a = action.as_array() if isinstance(action, ActionCmd) else np.asarray(action, float)
        return self.A_v @ a + self.b_v


def slip_angle(steer: float, geom: VehicleGeom) -> float:
    if not math.isfinite(steer):
        raise DomainError(f"non-finite steering angle {steer!r}")
    if abs(steer) >= math.pi / 2:
        raise DomainError(f"steering angle {steer} outside (-pi/2, pi/2)")
    return math.atan(geom.l_r / (geom.l_f + geom.l_r) * math.tan(steer))


def _slip_angle_derivative(steer: float, geom: VehicleGeom) -> float:
    k = geom.l_r / (geom.l_f + geom.l_r)
    t = math.tan(steer)
    return k * (1.0 + t * t) / (1.0 + k * k * t * t)


def wrap_angle(psi: float) -> float:
    """Map an angle onto (-pi, pi]."""
    if -math.pi < psi <= math.pi:
        return psi
    return -((math.pi - psi) % (2.0 * math.pi) - math.pi)


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def step(
    state: AgentState,
    action: ActionCmd,
    geom: VehicleGeom = DEFAULT_GEOM,
    dt: float = DEFAULT_DT,
    limits: VehicleLimits = DEFAULT_LIMITS,
) -> AgentState:
    """Advance one forward-Euler step. The action must already lie in the box."""
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if not limits.contains(action):
        raise PreconditionError(f"action {action} outside the action box")
    beta = slip_angle(action.steer, geom)
    heading = state.psi + beta
    x = state.x + dt * state.v * math.cos(heading)
    y = state.y + dt * state.v * math.sin(heading)
    psi = wrap_angle(state.psi + dt * (state.v / geom.l_r) * math.sin(beta))
    v = clamp(state.v + dt * action.accel, limits.v_min, limits.v_max)
    return AgentState(x, y, psi, v, action)


def output(state: AgentState, geom: VehicleGeom = DEFAULT_GEOM) -> OutputObs:
    beta = slip_angle(state.last_action.steer, geom)
    heading = state.psi + beta
    return OutputObs(
        pos=np.array([state.x, state.y]),
        vel=np.array([state.v * math.cos(heading), state.v * math.sin(heading)]),
    )


def next_velocity(
    state: AgentState,
    action,
    geom: VehicleGeom = DEFAULT_GEOM,
    dt: float = DEFAULT_DT,
    limits: VehicleLimits = DEFAULT_LIMITS,
) -> np.ndarray:
    """Observed velocity one step after applying `action` (no box check).

    Used by the linearization and its finite-difference check, which probe
    actions slightly outside the box.
    """
    accel, steer = (action.accel, action.steer) if isinstance(action, ActionCmd) else action
    beta = slip_angle(steer, geom)
    psi = state.psi + dt * (state.v / geom.l_r) * math.sin(beta)
    v = clamp(state.v + dt * accel, limits.v_min, limits.v_max)
    return np.array([v * math.cos(psi + beta), v * math.sin(psi + beta)])


def linearize_velocity_map(
    state: AgentState,
    ref_action: ActionCmd,
    geom: VehicleGeom = DEFAULT_GEOM,
    dt: float = DEFAULT_DT,
    limits: VehicleLimits = DEFAULT_LIMITS,
) -> VelocityLinearization:
    """Analytic Jacobian of action -> next observed velocity at `ref_action`."""
    if not limits.contains(ref_action):
        raise PreconditionError(f"reference action {ref_action} outside the action box")
    beta = slip_angle(ref_action.steer, geom)
    dbeta = _slip_angle_derivative(ref_action.steer, geom)
    raw_v = state.v + dt * ref_action.accel
    v_next = clamp(raw_v, limits.v_min, limits.v_max)
    # closed interval: an agent at rest with zero accel can still speed up
    dv_da = dt if limits.v_min <= raw_v <= limits.v_max else 0.0
    theta = state.psi + dt * (state.v / geom.l_r) * math.sin(beta) + beta
    dtheta_ds = (dt * (state.v / geom.l_r) * math.cos(beta) + 1.0) * dbeta
    c, s = math.cos(theta), math.sin(theta)
    A_v = np.array(
        [
            [dv_da * c, -v_next * s * dtheta_ds],
            [dv_da * s, v_next * c * dtheta_ds],
        ]
    )
    vel = np.array([v_next * c, v_next * s])
    b_v = vel - A_v @ np.array([ref_action.accel, ref_action.steer])
    return VelocityLinearization(A_v, b_v)


def linearize_velocity_map_fd(
    state: AgentState,
    ref_action: ActionCmd,
    geom: VehicleGeom = DEFAULT_GEOM,
    dt: float = DEFAULT_DT,
    limits: VehicleLimits = DEFAULT_LIMITS,
    h_fd: float = 1e-5,
) -> VelocityLinearization:
    """Central finite-difference fallback for `linearize_velocity_map`."""
    a0 = ref_action.as_array()
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h_fd
        plus = next_velocity(state, a0 + e, geom, dt, limits)
        minus = next_velocity(state, a0 - e, geom, dt, limits)
        cols.append((plus - minus) / (2.0 * h_fd))
    A_v = np.column_stack(cols)
    b_v = next_velocity(state, a0, geom, dt, limits) - A_v @ a0
    return VelocityLinearization(A_v, b_v)


# Vectorized kernels used by the batched training rollouts.


def slip_angle_array(steer: np.ndarray, geom: VehicleGeom) -> np.ndarray:
    return np.arctan(geom.l_r / (geom.l_f + geom.l_r) * np.tan(steer))


def wrap_angle_array(psi: np.ndarray) -> np.ndarray:
    inside = (psi > -math.pi) & (psi <= math.pi)
    return np.where(inside, psi, -((math.pi - psi) % (2.0 * math.pi) - math.pi))


def step_arrays(x, y, psi, v, accel, steer, geom: VehicleGeom, dt: float, limits: VehicleLimits):
    """Elementwise `step` over arrays of states; returns (x, y, psi, v)."""
    beta = slip_angle_array(steer, geom)
    heading = psi + beta
    x_n = x + dt * v * np.cos(heading)
    y_n = y + dt * v * np.sin(heading)
    psi_n = wrap_angle_array(psi + dt * (v / geom.l_r) * np.sin(beta))
    v_n = np.clip(v + dt * accel, limits.v_min, limits.v_max)
    return x_n, y_n, psi_n, v_n
