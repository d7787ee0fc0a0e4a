"""Evolution-strategies training of the shared two-agent policy.

Both agents of a task run the same parameters. A population member's
fitness is the mean of the two agents' discounted returns, averaged over
the generation's tasks. Training uses the raw policy; ORCA constraints
only enter at deployment.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from rlorca.dynamics import (
    DEFAULT_DT,
    AgentState,
    VehicleGeom,
    VehicleLimits,
    slip_angle_array,
    step_arrays,
)
from rlorca.errors import ConfigError, DomainError
from rlorca.policy import N_PARAMS, ObsScales, check_params, load_params, mlp_raw, observation_arrays, save_params
from rlorca.scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardConfig:
    r_arrival: float = 10.0
    d_arrival: float = 0.3
    r_collision: float = -20.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.r_arrival > 0 and self.r_collision < 0 and self.d_arrival > 0 and 0 < self.gamma <= 1):
            raise DomainError(f"invalid reward configuration {self}")


@dataclass(frozen=True)
class EsConfig:
    population_size: int = 64
    sigma: float = 0.05
    learning_rate: float = 0.05
    generations: int = 30
    episodes_per_eval: int = 8
    max_episode_steps: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise DomainError("population_size must be a positive even number")
        if not (self.sigma > 0 and self.learning_rate > 0):
            raise DomainError("sigma and learning_rate must be positive")


@dataclass(frozen=True)
class TaskConfig:
    """Two-agent task distribution.

    With probability `p_cross` both agents start on a circle of radius in
    [radius_min, radius_max] and head for (jittered) antipodal points, so
    their straight paths cross near the centre. Otherwise starts and goals
    are uniform in the disc.
    """

    radius_min: float = 3.0
    radius_max: float = 10.0
    p_cross: float = 0.7
    jitter: float = 0.5
    margin: float = 0.5
    v0_max: float = 1.0


@dataclass(frozen=True)
class TrainConfig:
    es: EsConfig = EsConfig()
    reward: RewardConfig = RewardConfig()
    task: TaskConfig = TaskConfig()
    geom: VehicleGeom = VehicleGeom()
    limits: VehicleLimits = VehicleLimits()
    scales: ObsScales = ObsScales()
    dt: float = DEFAULT_DT

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        try:
            return cls(
                es=EsConfig(**d.get("es", {})),
                reward=RewardConfig(**d.get("reward", {})),
                task=TaskConfig(**d.get("task", {})),
                geom=VehicleGeom(**d.get("geom", {})),
                limits=VehicleLimits(**d.get("limits", {})),
                scales=ObsScales(**d.get("scales", {})),
                dt=float(d.get("dt", DEFAULT_DT)),
            )
        except (TypeError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class EpisodeResult:
    return_per_agent: np.ndarray
    collided: bool
    both_arrived: bool
    steps: int
    trajectory: dict | None = field(default=None, repr=False)


# Reward


def goal_reward(next_pos, goal, cfg: RewardConfig) -> float:
    d = math.hypot(next_pos[0] - goal[0], next_pos[1] - goal[1])
    return cfg.r_arrival if d < cfg.d_arrival else 0.0


def progress_reward(next_pos, goal, initial_pos, cfg: RewardConfig) -> float:
    d = math.hypot(next_pos[0] - goal[0], next_pos[1] - goal[1])
    d0 = math.hypot(initial_pos[0] - goal[0], initial_pos[1] - goal[1])
    return -d / max(d0, cfg.d_arrival)


def collision_reward(next_pos, other_next_pos, cfg: RewardConfig, geom: VehicleGeom) -> float:
    d = math.hypot(next_pos[0] - other_next_pos[0], next_pos[1] - other_next_pos[1])
    return cfg.r_collision if d < 2.0 * geom.radius else 0.0


def _pos(s) -> tuple[float, float]:
    return (s.x, s.y) if isinstance(s, AgentState) else (float(s[0]), float(s[1]))


def step_reward(next_state, goal, initial_state, other_next_state, cfg: RewardConfig, geom: VehicleGeom) -> float:
    """Arrival bonus + normalized progress penalty + collision penalty for one agent-step.

    Distances use positions only. States may be AgentState or (x, y) pairs.
    The progress term's normalizer is floored at d_arrival so a goal at the
    start position stays finite.
    """
    p, p0, q = _pos(next_state), _pos(initial_state), _pos(other_next_state)
    return goal_reward(p, goal, cfg) + progress_reward(p, goal, p0, cfg) + collision_reward(p, q, cfg, geom)


# Task sampling


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def paths_cross(sc: Scenario) -> bool:
    p = sc.positions()
    return _segments_cross(p[0], sc.goals[0], p[1], sc.goals[1])


def sample_task(rng: np.random.Generator, cfg: TrainConfig = TrainConfig()) -> Scenario:
    tc = cfg.task
    min_sep = 2.0 * cfg.geom.radius + tc.margin
    while True:
        R = rng.uniform(tc.radius_min, tc.radius_max)
        if rng.random() < tc.p_cross:
            th0 = rng.uniform(-math.pi, math.pi)
            th1 = th0 + rng.uniform(math.pi / 6, 11 * math.pi / 6)
            starts = R * np.array([[math.cos(th0), math.sin(th0)], [math.cos(th1), math.sin(th1)]])
            goals = -starts + rng.uniform(-tc.jitter, tc.jitter, size=(2, 2))
        else:
            r = R * np.sqrt(rng.random(4))
            a = rng.uniform(-math.pi, math.pi, 4)
            pts = np.column_stack([r * np.cos(a), r * np.sin(a)])
            starts, goals = pts[:2], pts[2:]
        psi = rng.uniform(-math.pi, math.pi, 2)
        v = rng.uniform(0.0, tc.v0_max, 2)
        if np.hypot(*(starts[0] - starts[1])) < min_sep or np.hypot(*(goals[0] - goals[1])) < min_sep:
            continue
        agents = tuple(AgentState(float(starts[k, 0]), float(starts[k, 1]), float(psi[k]), float(v[k])) for k in range(2))
        return Scenario(agents, goals, geom=cfg.geom, limits=cfg.limits, dt=cfg.dt, name="task")


# Rollouts


def rollout_batch(params, tasks: list[Scenario], cfg: TrainConfig, record: bool = False) -> list[EpisodeResult]:
    """Run one two-agent episode per task, all in lockstep.

    `params` is a flat vector shared by all tasks or a (len(tasks), 450)
    array giving each task its own parameters.
    """
    params = check_params(params)
    B = len(tasks)
    if params.ndim == 2 and len(params) != B:
        raise ConfigError("one parameter row per task required")
    P = params[:, None, :] if params.ndim == 2 else params
    rc, geom, lim = cfg.reward, cfg.geom, cfg.limits
    center, half = lim.center, lim.half_width
    inv_scale = 1.0 / cfg.scales.vector()

    x = np.array([[s.x for s in t.agents] for t in tasks], dtype=float).reshape(B, 2)
    y = np.array([[s.y for s in t.agents] for t in tasks], dtype=float).reshape(B, 2)
    psi = np.array([[s.psi for s in t.agents] for t in tasks], dtype=float).reshape(B, 2)
    v = np.array([[s.v for s in t.agents] for t in tasks], dtype=float).reshape(B, 2)
    steer = np.array([[s.last_action.steer for s in t.agents] for t in tasks], dtype=float).reshape(B, 2)
    goals = np.array([t.goals for t in tasks], dtype=float).reshape(B, 2, 2)
    gx, gy = goals[..., 0], goals[..., 1]
    d0 = np.hypot(x - gx, y - gy)
    norm = np.maximum(d0, rc.d_arrival)

    arrived = np.zeros((B, 2), bool)
    done = np.zeros(B, bool)
    collided = np.zeros(B, bool)
    returns = np.zeros((B, 2))
    steps = np.zeros(B, int)
    disc = 1.0
    traj = [dict(x=x.copy(), y=y.copy(), moving=None)] if record else None

    for _ in range(cfg.es.max_episode_steps):
        if done.all():
            break
        beta = slip_angle_array(steer, geom)
        vx, vy = v * np.cos(psi + beta), v * np.sin(psi + beta)
        obs = observation_arrays(x, y, psi, v, beta, gx, gy, x[:, ::-1], y[:, ::-1], vx[:, ::-1], vy[:, ::-1])
        act = center + half * mlp_raw(P, obs * inv_scale)
        moving = ~arrived & ~done[:, None]
        accel = np.where(moving, act[..., 0], 0.0)
        steer_cmd = np.where(moving, act[..., 1], steer)
        xn, yn, psin, vn = step_arrays(x, y, psi, v, accel, steer_cmd, geom, cfg.dt, lim)
        x, y = np.where(moving, xn, x), np.where(moving, yn, y)
        psi, v, steer = np.where(moving, psin, psi), np.where(moving, vn, v), steer_cmd

        dist_goal = np.hypot(x - gx, y - gy)
        pair = np.hypot(x[:, 0] - x[:, 1], y[:, 0] - y[:, 1])
        hit = (pair < 2.0 * geom.radius) & ~done
        at_goal = dist_goal < rc.d_arrival
        r = -dist_goal / norm + np.where(at_goal, rc.r_arrival, 0.0) + np.where(hit[:, None], rc.r_collision, 0.0)
        returns += disc * np.where(moving, r, 0.0)
        disc *= rc.gamma

        newly = moving & at_goal
        arrived |= newly
        v = np.where(newly, 0.0, v)
        collided |= hit
        steps += ~done
        done |= hit | arrived.all(axis=1)
        if record:
            traj.append(dict(x=x.copy(), y=y.copy(), moving=moving.copy()))

    out = []
    for b in range(B):
        tr = None
        if record:
            n = steps[b]
            tr = dict(
                x=np.array([t["x"][b] for t in traj[: n + 1]]),
                y=np.array([t["y"][b] for t in traj[: n + 1]]),
                moving=np.array([t["moving"][b] for t in traj[1 : n + 1]]).reshape(-1, 2),
            )
        out.append(EpisodeResult(returns[b].copy(), bool(collided[b]), bool(arrived[b].all()), int(steps[b]), tr))
    return out


def rollout(params, scenario: Scenario, cfg: TrainConfig = TrainConfig(), record: bool = False) -> EpisodeResult:
    """Raw-policy two-agent episode (no ORCA), ending on double arrival, collision or the step cap."""
    return rollout_batch(params, [scenario], cfg, record)[0]


# ES


def centered_ranks(fitness: np.ndarray) -> np.ndarray:
    """Ranks mapped to [-0.5, 0.5]; tied fitnesses share their average rank."""
    n = len(fitness)
    if n == 1:
        return np.zeros(1)
    return (rankdata(fitness, method="average") - 1.0) / (n - 1) - 0.5


def es_update(params, noise: np.ndarray, fit_plus: np.ndarray, fit_minus: np.ndarray, cfg: EsConfig) -> np.ndarray:
    """Antithetic rank-normalized ES step.

    Row k of `noise` produced members params +/- sigma * noise[k] whose
    fitnesses are fit_plus[k] and fit_minus[k].
    """
    params = check_params(params)
    noise = np.asarray(noise, float)
    w = centered_ranks(np.concatenate([fit_plus, fit_minus]))
    half = len(fit_plus)
    coeff = w[:half] - w[half:]
    grad = (coeff[:, None] * noise).sum(axis=0) / (2 * half * cfg.sigma)
    return params + cfg.learning_rate * grad


def initial_params(seed: int) -> np.ndarray:
    """Glorot-style random initial weights, zero biases."""
    from rlorca.policy import LAYER_SIZES

    rng = np.random.default_rng([seed, 7919])
    parts = []
    for n_in, n_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        parts.append(rng.normal(0.0, math.sqrt(1.0 / n_in), n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def population_fitness(params_batch: np.ndarray, tasks: list[Scenario], cfg: TrainConfig):
    """Fitness of each row of `params_batch` on the shared task list; also collision and arrival rates."""
    P, E = len(params_batch), len(tasks)
    rows = np.repeat(params_batch, E, axis=0)
    results = rollout_batch(rows, tasks * P, cfg)
    ret = np.array([r.return_per_agent.mean() for r in results]).reshape(P, E)
    coll = np.mean([r.collided for r in results])
    arr = np.mean([r.both_arrived for r in results])
    return ret.mean(axis=1), coll, arr


def generation_tasks(cfg: TrainConfig, generation: int):
    rng = np.random.default_rng([cfg.es.seed, generation])
    noise = rng.standard_normal((cfg.es.population_size // 2, N_PARAMS))
    tasks = [sample_task(rng, cfg) for _ in range(cfg.es.episodes_per_eval)]
    return noise, tasks


LOG_FIELDS = ("generation", "mean_fitness", "best_fitness", "collision_rate", "arrival_rate")


def params_hash(params) -> str:
    return hashlib.sha256(np.asarray(params, dtype="<f8").tobytes()).hexdigest()


def train(
    cfg: TrainConfig,
    params=None,
    start_generation: int = 0,
    checkpoint_dir=None,
    log_path=None,
    checkpoint_every: int = 1,
) -> tuple[np.ndarray, list[dict]]:
    """Run ES generations [start_generation, cfg.es.generations).

    Generation g draws its noise and tasks from an RNG seeded by (seed, g),
    so resuming from a checkpoint continues exactly as an uninterrupted run.
    """
    es = cfg.es
    theta = initial_params(es.seed) if params is None else check_params(params).copy()
    history: list[dict] = []
    ckpt = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt:
        ckpt.mkdir(parents=True, exist_ok=True)
    for g in range(start_generation, es.generations):
        noise, tasks = generation_tasks(cfg, g)
        members = np.concatenate([theta + es.sigma * noise, theta - es.sigma * noise])
        fit, coll, arr = population_fitness(members, tasks, cfg)
        half = len(noise)
        row = dict(
            generation=g,
            mean_fitness=float(fit.mean()),
            best_fitness=float(fit.max()),
            collision_rate=float(coll),
            arrival_rate=float(arr),
        )
        history.append(row)
        log.info("gen %d mean %.3f best %.3f coll %.2f arr %.2f", g, *list(row.values())[1:])
        theta = es_update(theta, noise, fit[:half], fit[half:], es)
        if ckpt and ((g + 1) % checkpoint_every == 0 or g + 1 == es.generations):
            write_checkpoint(ckpt, theta, g + 1, cfg)
    if log_path:
        write_log(log_path, history)
    return theta, history


def write_log(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        w.writeheader()
        w.writerows(history)


def write_checkpoint(directory: Path, params, generation: int, cfg: TrainConfig) -> Path:
    name = f"gen_{generation:05d}.params"
    save_params(directory / name, params)
    meta = dict(generation=generation, params=name, sha256=params_hash(params), config=cfg.to_dict())
    (directory / "latest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return directory / name


def load_checkpoint(meta_path) -> tuple[np.ndarray, int, TrainConfig]:
    meta_path = Path(meta_path)
    meta = json.loads(meta_path.read_text())
    params = load_params(meta_path.parent / meta["params"])
    return params, int(meta["generation"]), TrainConfig.from_dict(meta["config"])


def resume(meta_path, checkpoint_dir=None, log_path=None) -> tuple[np.ndarray, list[dict]]:
    params, gen, cfg = load_checkpoint(meta_path)
    return train(cfg, params, gen, checkpoint_dir, log_path)
