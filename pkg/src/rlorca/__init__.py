"""Decentralized collision avoidance for kinematic bicycle agents.

A small two-agent policy proposes actions per neighbor, the actions are
blended by pseudo-distance weights, and ORCA half-planes mapped into
action space keep the blended action safe through a 2-variable QP.
"""

from rlorca.dynamics import (
    ActionCmd,
    AgentState,
    OutputObs,
    VehicleGeom,
    VehicleLimits,
    VelocityLinearization,
    linearize_velocity_map,
    output,
    slip_angle,
    step,
)
from rlorca.errors import (
    ConfigError,
    DegenerateGeometryError,
    DomainError,
    FormatError,
    PreconditionError,
    ShapeError,
    UsageError,
)

__all__ = [
    "ActionCmd",
    "AgentState",
    "OutputObs",
    "VehicleGeom",
    "VehicleLimits",
    "VelocityLinearization",
    "linearize_velocity_map",
    "output",
    "slip_angle",
    "step",
    "ConfigError",
    "DegenerateGeometryError",
    "DomainError",
    "FormatError",
    "PreconditionError",
    "ShapeError",
    "UsageError",
]

__version__ = "0.1.0"
