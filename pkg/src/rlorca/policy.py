"""Two-agent avoidance policy: ego-frame observation and an 8-16-16-2 tanh MLP.

Parameter layout (flat, row-major): W1 (8x16), b1, W2 (16x16), b2,
W3 (16x2), b3. Outputs pass through tanh and are mapped affinely onto the
action box, so every action is admissible by construction.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from rlorca.dynamics import (
    DEFAULT_GEOM,
    DEFAULT_LIMITS,
    ActionCmd,
    AgentState,
    OutputObs,
    VehicleGeom,
    VehicleLimits,
    slip_angle,
)
from rlorca.errors import FormatError, ShapeError

LAYER_SIZES = (8, 16, 16, 2)
PARAMS_MAGIC = b"RLORCAP1"


def param_count(layer_sizes: Sequence[int] = LAYER_SIZES) -> int:
    return sum(n_in * n_out + n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]))


N_PARAMS = param_count(LAYER_SIZES)


@dataclass(frozen=True)
class Observation8:
    goal_pos_local: np.ndarray
    own_vel_local: np.ndarray
    nbr_pos_local: np.ndarray
    nbr_vel_local: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.goal_pos_local, self.own_vel_local, self.nbr_pos_local, self.nbr_vel_local])

    @classmethod
    def from_array(cls, arr) -> "Observation8":
        arr = np.asarray(arr, float)
        if arr.shape != (8,):
            raise ShapeError(f"observation must have 8 entries, got shape {arr.shape}")
        return cls(arr[0:2], arr[2:4], arr[4:6], arr[6:8])


@dataclass(frozen=True)
class ObsScales:
    """Divisors applied before the network sees an observation."""

    pos: float = 10.0
    vel: float = 2.0

    def vector(self) -> np.ndarray:
        p, v = self.pos, self.vel
        return np.array([p, p, v, v, p, p, v, v])


def observation_arrays(ego_x, ego_y, ego_psi, ego_v, ego_beta, goal_x, goal_y, nbr_x, nbr_y, nbr_vx, nbr_vy):
    """Vectorized ego-frame observation; every argument broadcasts, result has a trailing axis of 8."""
    c, s = np.cos(ego_psi), np.sin(ego_psi)
    gx, gy = goal_x - ego_x, goal_y - ego_y
    nx, ny = nbr_x - ego_x, nbr_y - ego_y
    return np.stack(
        np.broadcast_arrays(
            c * gx + s * gy,
            -s * gx + c * gy,
            ego_v * np.cos(ego_beta),
            ego_v * np.sin(ego_beta),
            c * nx + s * ny,
            -s * nx + c * ny,
            c * nbr_vx + s * nbr_vy,
            -s * nbr_vx + c * nbr_vy,
        ),
        axis=-1,
    )


def build_observation(
    own: AgentState,
    goal_pos,
    nbr: OutputObs,
    geom: VehicleGeom = DEFAULT_GEOM,
    scales: ObsScales | None = None,
) -> Observation8:
    beta = slip_angle(own.last_action.steer, geom)
    arr = observation_arrays(
        own.x, own.y, own.psi, own.v, beta,
        goal_pos[0], goal_pos[1],
        nbr.pos[0], nbr.pos[1], nbr.vel[0], nbr.vel[1],
    )
    if scales is not None:
        arr = arr / scales.vector()
    return Observation8.from_array(arr)


def to_world(own: AgentState, obs: Observation8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse frame transform of an unscaled observation: (goal, nbr_pos, nbr_vel) in world coordinates."""
    c, s = math.cos(own.psi), math.sin(own.psi)
    rot = np.array([[c, -s], [s, c]])
    origin = np.array([own.x, own.y])
    return origin + rot @ obs.goal_pos_local, origin + rot @ obs.nbr_pos_local, rot @ obs.nbr_vel_local


def check_params(params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape[-1:] != (N_PARAMS,):
        raise ShapeError(f"expected {N_PARAMS} parameters, got shape {params.shape}")
    return params


def _unpack(params: np.ndarray):
    """Split a (..., 450) array into per-layer (W, b) with leading batch axes kept."""
    layers = []
    pos = 0
    lead = params.shape[:-1]
    for n_in, n_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        W = params[..., pos : pos + n_in * n_out].reshape(*lead, n_in, n_out)
        pos += n_in * n_out
        b = params[..., pos : pos + n_out]
        pos += n_out
        layers.append((W, b))
    return layers


def mlp_raw(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """tanh MLP output in [-1, 1]^2.

    A flat parameter vector is shared by every row of `x` and evaluated
    with einsum, whose per-row result does not depend on how many rows are
    evaluated together. Batched parameters (leading axes broadcasting
    against the batch axes of `x`) go through stacked matmul.
    """
    h = x
    for W, b in _unpack(params):
        if W.ndim == 2:
            z = np.einsum("...i,ij->...j", h, W)
        else:
            z = np.matmul(h[..., None, :], W)[..., 0, :]
        h = np.tanh(z + b)
    return h


def forward_array(
    params,
    obs: np.ndarray,
    box: VehicleLimits = DEFAULT_LIMITS,
    scales: ObsScales | None = None,
) -> np.ndarray:
    params = check_params(params)
    x = np.asarray(obs, float)
    if scales is not None:
        x = x / scales.vector()
    return box.center + box.half_width * mlp_raw(params, x)


def forward(
    params,
    obs: Observation8,
    box: VehicleLimits = DEFAULT_LIMITS,
    scales: ObsScales | None = None,
) -> ActionCmd:
    arr = obs.as_array() if isinstance(obs, Observation8) else np.asarray(obs, float)
    return ActionCmd.from_array(forward_array(params, arr, box, scales))


@dataclass(frozen=True)
class Policy:
    """Trained parameters bundled with the observation scales and action box they were trained for."""

    params: np.ndarray
    box: VehicleLimits = DEFAULT_LIMITS
    scales: ObsScales = ObsScales()

    def __post_init__(self):
        p = check_params(self.params).copy()
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    def act_array(self, raw_obs: np.ndarray) -> np.ndarray:
        return forward_array(self.params, raw_obs, self.box, self.scales)

    def act(self, obs: Observation8) -> ActionCmd:
        return forward(self.params, obs, self.box, self.scales)


def save_params(path, params) -> None:
    params = check_params(params)
    if params.ndim != 1:
        raise ShapeError("save_params expects a flat parameter vector")
    data = PARAMS_MAGIC + struct.pack("<Q", params.size) + params.astype("<f8").tobytes()
    Path(path).write_bytes(data)


def load_params(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != PARAMS_MAGIC:
        raise FormatError(f"{path}: not a parameter file")
    (n,) = struct.unpack("<Q", data[8:16])
    if n != N_PARAMS:
        raise FormatError(f"{path}: declares {n} parameters, expected {N_PARAMS}")
    body = data[16:]
    if len(body) != 8 * n:
        raise FormatError(f"{path}: body has {len(body)} bytes, expected {8 * n}")
    params = np.frombuffer(body, dtype="<f8").astype(float)
    if not np.all(np.isfinite(params)):
        raise FormatError(f"{path}: non-finite parameters")
    return params
