"""Scenario definition, builtin scenario library and JSON config I/O.

Config schema (``format: 1``)::

    {
      "format": 1,
      "dt": 0.05, "max_steps": 2400, "arrival_radius": 0.3,
      "geom": {"l_f": 0.5, "l_r": 0.5, "radius": 0.5},
      "limits": {"accel_min": -1, "accel_max": 1, "steer_max": 0.6, "v_min": 0, "v_max": 2},
      "orca": {"horizon": 2.0, "max_neighbors": 10, "radius_inflation": 1.1},
      "combiner": {"alpha": 1.0, "beta": 0.4, "v_eps": 1e-6, "d_floor": 1e-3},
      "agents": [{"x": 0, "y": 0, "psi": 0, "v": 0, "goal": [5, 0]}, ...]
    }

Instead of ``agents`` a config may name a builtin layout:
``"builtin": {"name": "circle", "params": {"n": 8}}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rlorca.combiner import CombinerConfig
from rlorca.dynamics import DEFAULT_DT, AgentState, VehicleGeom, VehicleLimits
from rlorca.errors import ConfigError, DomainError, UsageError
from rlorca.orca import OrcaConfig

CONFIG_FORMAT = 1
BUILTIN_NAMES = ("circle", "concentric", "head_on", "crossing")


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentState, ...]
    goals: np.ndarray
    geom: VehicleGeom = VehicleGeom()
    limits: VehicleLimits = VehicleLimits()
    dt: float = DEFAULT_DT
    max_steps: int = 2400
    orca: OrcaConfig = OrcaConfig()
    combiner: CombinerConfig = CombinerConfig()
    arrival_radius: float = 0.3
    name: str = "custom"

    def __post_init__(self):
        goals = np.asarray(self.goals, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "goals", goals)
        if len(goals) != len(self.agents):
            raise ConfigError("one goal per agent required")
        if not np.all(np.isfinite(goals)):
            raise ConfigError("goals must be finite")
        pos = self.positions()
        if len(pos) > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.hypot(diff[..., 0], diff[..., 1]) + np.diag(np.full(len(pos), np.inf))
            if dist.min() <= 2.0 * self.geom.radius:
                raise ConfigError("initial pairwise distances must exceed 2r")

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.agents], dtype=float).reshape(-1, 2)


def _circle_points(n: int, radius: float, phase: float = 0.0) -> np.ndarray:
    ang = phase + 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def circle(n: int, radius: float | None = None, v0: float = 0.0, clockwise_heading: bool | None = None, **kw) -> Scenario:
    """Agents evenly spaced on a circle, each heading for the antipodal point.

    By default agents face the centre at rest. The 42-agent layout instead
    points every agent at its clockwise neighbor with speed `v0`.
    """
    if n < 1:
        raise DomainError("circle needs at least one agent")
    if radius is None:
        radius = max(6.0, 1.9 * n / (2.0 * math.pi))
    if clockwise_heading is None:
        clockwise_heading = n == 42
    if clockwise_heading and v0 == 0.0 and n == 42:
        v0 = 0.5
    pos = _circle_points(n, radius)
    agents = []
    for i, (x, y) in enumerate(pos):
        if clockwise_heading and n > 1:
            nx, ny = pos[(i - 1) % n]
            psi = math.atan2(ny - y, nx - x)
        else:
            psi = math.atan2(-y, -x)
        agents.append(AgentState(float(x), float(y), psi, v0))
    return Scenario(tuple(agents), -pos, name=f"circle{n}", **kw)


def concentric(n_outer: int = 10, n_inner: int = 10, r_outer: float = 12.0, r_inner: float = 6.0, **kw) -> Scenario:
    """Two co-centric rings; each agent crosses the centre to the other ring's opposite side.

    Outer agent k starts at angle t_k on the big circle and ends on the
    small circle on the ray through the centre (angle t_k + pi), and
    inner agents symmetrically end on the big circle.
    """
    phase_inner = math.pi / n_inner if n_inner == n_outer else 0.0
    outer = _circle_points(n_outer, r_outer)
    inner = _circle_points(n_inner, r_inner, phase_inner)
    goals_outer = -outer * (r_inner / r_outer)
    goals_inner = -inner * (r_outer / r_inner)
    pos = np.vstack([outer, inner])
    goals = np.vstack([goals_outer, goals_inner])
    agents = [AgentState(float(x), float(y), math.atan2(-y, -x), 0.0) for x, y in pos]
    return Scenario(tuple(agents), goals, name=f"concentric{n_outer}_{n_inner}", **kw)


def head_on(distance: float = 10.0, offset: float = 0.0, v0: float = 0.0, **kw) -> Scenario:
    """Two agents facing each other on the x-axis, goals swapped."""
    h = 0.5 * distance
    agents = (AgentState(-h, offset, 0.0, v0), AgentState(h, -offset, math.pi, v0))
    goals = np.array([[h, offset], [-h, -offset]])
    return Scenario(agents, goals, name="head_on", **kw)


def crossing(distance: float = 10.0, v0: float = 0.0, **kw) -> Scenario:
    """Two agents on perpendicular paths meeting at the origin."""
    h = 0.5 * distance
    agents = (AgentState(-h, 0.0, 0.0, v0), AgentState(0.0, -h, math.pi / 2, v0))
    goals = np.array([[h, 0.0], [0.0, h]])
    return Scenario(agents, goals, name="crossing", **kw)


_BUILDERS = {"circle": circle, "concentric": concentric, "head_on": head_on, "crossing": crossing}


def builtin_scenario(name: str, params: dict | None = None, **kw) -> Scenario:
    if name not in _BUILDERS:
        raise ConfigError(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return _BUILDERS[name](**(params or {}), **kw)


# JSON config


def _section(cfg: dict, key: str) -> dict:
    sec = cfg.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be an object")
    return sec


def module_configs_from_dict(cfg: dict) -> dict:
    """Shared keyword arguments (geom, limits, dt, ...) parsed from a config dict."""
    try:
        geom = VehicleGeom(**_section(cfg, "geom"))
        limits = VehicleLimits(**_section(cfg, "limits"))
        o = _section(cfg, "orca")
        orca = OrcaConfig(
            horizon_T=float(o.get("horizon", 2.0)),
            max_neighbors_K=int(o.get("max_neighbors", 10)),
            v_max=limits.v_max,
            radius_inflation=float(o.get("radius_inflation", 1.1)),
        )
        c = _section(cfg, "combiner")
        combiner = CombinerConfig(
            alpha=float(c.get("alpha", 1.0)),
            beta_w=float(c.get("beta", 0.4)),
            v_eps=float(c.get("v_eps", 1e-6)),
            d_floor=float(c.get("d_floor", 1e-3)),
        )
        out = dict(geom=geom, limits=limits, orca=orca, combiner=combiner)
        if "dt" in cfg:
            out["dt"] = float(cfg["dt"])
            if not out["dt"] > 0:
                raise ConfigError("dt must be positive")
        if "max_steps" in cfg:
            out["max_steps"] = int(cfg["max_steps"])
        if "arrival_radius" in cfg:
            out["arrival_radius"] = float(cfg["arrival_radius"])
        return out
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc


def scenario_from_dict(cfg: dict) -> Scenario:
    if cfg.get("format") != CONFIG_FORMAT:
        raise ConfigError(f"unsupported config format {cfg.get('format')!r}; expected {CONFIG_FORMAT}")
    kw = module_configs_from_dict(cfg)
    if "builtin" in cfg:
        b = cfg["builtin"]
        return builtin_scenario(b["name"], b.get("params"), **kw)
    if "agents" not in cfg:
        raise ConfigError("config needs 'agents' or 'builtin'")
    try:
        agents = [AgentState(float(a["x"]), float(a["y"]), float(a.get("psi", 0.0)), float(a.get("v", 0.0))) for a in cfg["agents"]]
        goals = np.array([a["goal"] for a in cfg["agents"]], dtype=float).reshape(-1, 2)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad agent entry: {exc}") from exc
    return Scenario(tuple(agents), goals, name=str(cfg.get("name", "custom")), **kw)


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": CONFIG_FORMAT,
        "name": sc.name,
        "dt": sc.dt,
        "max_steps": sc.max_steps,
        "arrival_radius": sc.arrival_radius,
        "geom": {"l_f": sc.geom.l_f, "l_r": sc.geom.l_r, "radius": sc.geom.radius},
        "limits": {
            "accel_min": sc.limits.accel_min,
            "accel_max": sc.limits.accel_max,
            "steer_max": sc.limits.steer_max,
            "v_min": sc.limits.v_min,
            "v_max": sc.limits.v_max,
        },
        "orca": {
            "horizon": sc.orca.horizon_T,
            "max_neighbors": sc.orca.max_neighbors_K,
            "radius_inflation": sc.orca.radius_inflation,
        },
        "combiner": {
            "alpha": sc.combiner.alpha,
            "beta": sc.combiner.beta_w,
            "v_eps": sc.combiner.v_eps,
            "d_floor": sc.combiner.d_floor,
        },
        "agents": [
            {"x": s.x, "y": s.y, "psi": s.psi, "v": s.v, "goal": [float(g[0]), float(g[1])]}
            for s, g in zip(sc.agents, sc.goals)
        ],
    }


def load_scenario(spec: str, overrides: dict | None = None) -> Scenario:
    """Load `builtin:NAME` or a JSON config path; `overrides` are Scenario fields (dt, max_steps)."""
    if spec.startswith("builtin:"):
        name, _, arg = spec[len("builtin:") :].partition(":")
        if name not in _BUILDERS:
            raise UsageError(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
        params = {}
        if arg:
            params = {"n": int(arg)} if name == "circle" else json.loads(arg)
        sc = builtin_scenario(name, params)
    else:
        try:
            cfg = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario {spec}: {exc}") from exc
        sc = scenario_from_dict(cfg)
    if overrides:
        sc = replace(sc, **{k: v for k, v in overrides.items() if v is not None})
    return sc
