"""Multi-agent world stepping, run loop and run metrics.

Every step is synchronous: all agents decide from the same time-k
snapshot of outputs, then all actions are applied together. Per agent:

1. query the policy once per selected neighbor,
2. blend the actions by pseudo-distance weights,
3. build ORCA half-planes against the same neighbors,
4. linearize action -> next velocity around the last action,
5. project the blended action onto the safe set.

Agents that reach their goal stop (speed 0) and stay in place as static
obstacles for the others.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from rlorca.combiner import combine_array, neighbor_weight
from rlorca.dynamics import ActionCmd, AgentState, OutputObs, linearize_velocity_map, output, slip_angle, step
from rlorca.orca import halfplane_for_pair, neighbor_indices, constraints_for_agent
from rlorca.policy import Policy, observation_arrays
from rlorca.qp import OPTIMAL, solve_rows, to_action_constraints
from rlorca.scenario import Scenario
from rlorca.errors import DegenerateGeometryError

ARRIVED = "arrived"
DEADLOCK_WINDOW = 100
DEADLOCK_PROGRESS = 0.05
INTERVENTION_THRESHOLD = 0.05


@dataclass
class Decision:
    """Per-agent diagnostics of one step."""

    combined: ActionCmd
    action: ActionCmd
    status: str
    max_violation: float = 0.0
    neighbors: tuple[int, ...] = ()


def _neighbors(i: int, outs: list[OutputObs], sc: Scenario) -> list[int]:
    others = [o for j, o in enumerate(outs) if j != i]
    return [j if j < i else j + 1 for j in neighbor_indices(outs[i], others, sc.orca)]


def virtual_neighbor(state: AgentState, sc: Scenario) -> OutputObs:
    """Stationary stand-in placed far behind an agent that has no neighbors in range."""
    far = max(sc.orca.cutoff, 10.0)
    return OutputObs(
        pos=np.array([state.x - far * math.cos(state.psi), state.y - far * math.sin(state.psi)]),
        vel=np.zeros(2),
    )


def _policy_actions(states, goals, outs, nbr_lists, policy: Policy, sc: Scenario) -> list[np.ndarray]:
    """Evaluate every (agent, neighbor) pair of the step in one batch."""
    rows = []
    for i, nbrs in enumerate(nbr_lists):
        if nbrs is None:
            continue
        s = states[i]
        beta = slip_angle(s.last_action.steer, sc.geom)
        others = [outs[j] for j in nbrs] if nbrs else [virtual_neighbor(s, sc)]
        for o in others:
            rows.append((s.x, s.y, s.psi, s.v, beta, goals[i, 0], goals[i, 1], o.pos[0], o.pos[1], o.vel[0], o.vel[1]))
    if not rows:
        return [None] * len(nbr_lists)
    cols = np.array(rows, dtype=float).T
    acts = policy.act_array(observation_arrays(*cols))
    out, k = [], 0
    for nbrs in nbr_lists:
        if nbrs is None:
            out.append(None)
            continue
        n = max(len(nbrs), 1)
        out.append(acts[k : k + n])
        k += n
    return out


def _decide(i: int, states, outs, nbrs: list[int], actions: np.ndarray, sc: Scenario) -> Decision:
    s = states[i]
    own = outs[i]
    if nbrs:
        w = np.array([neighbor_weight(own.pos - outs[j].pos, outs[j].vel, sc.combiner) for j in nbrs])
        comb = combine_array(actions, w)
    else:
        comb = actions[0]
    combined_radius = sc.orca.radius_inflation * 2.0 * sc.geom.radius
    planes = []
    for j in nbrs:
        try:
            planes.append(halfplane_for_pair(own, outs[j], combined_radius, sc.orca.horizon_T, sc.dt))
        except DegenerateGeometryError:
            planes.extend(constraints_for_agent(own, [outs[j]], sc.geom, sc.orca, sc.dt, agent_index=i))
    lin = linearize_velocity_map(s, s.last_action, sc.geom, sc.dt, sc.limits)
    rows = to_action_constraints(planes, lin)
    G = np.array([g for g, _ in rows]).reshape(-1, 2)
    h = np.array([c for _, c in rows])
    sol = solve_rows(comb, G, h, sc.limits)
    return Decision(ActionCmd.from_array(comb), sol.action, sol.status, sol.max_violation, tuple(nbrs))


def step_world(
    states: list[AgentState],
    goals: np.ndarray,
    policy: Policy,
    sc: Scenario,
    arrived=None,
    order=None,
    workers: int = 1,
) -> tuple[list[AgentState], list[Decision | None]]:
    """One synchronous step. Returns the new states and per-agent decisions (None for arrived agents)."""
    M = len(states)
    arrived = np.zeros(M, bool) if arrived is None else np.asarray(arrived, bool)
    order = list(range(M)) if order is None else list(order)
    outs = [output(s, sc.geom) for s in states]
    nbr_lists: list = [None] * M
    for i in order:
        if not arrived[i]:
            nbr_lists[i] = _neighbors(i, outs, sc)
    acts = _policy_actions(states, goals, outs, nbr_lists, policy, sc)

    active = [i for i in order if not arrived[i]]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda i: _decide(i, states, outs, nbr_lists[i], acts[i], sc), active))
    else:
        results = [_decide(i, states, outs, nbr_lists[i], acts[i], sc) for i in active]
    decisions: list[Decision | None] = [None] * M
    for i, d in zip(active, results):
        decisions[i] = d

    new_states = [
        s if d is None else step(s, d.action, sc.geom, sc.dt, sc.limits) for s, d in zip(states, decisions)
    ]
    return new_states, decisions


@dataclass
class TrajectoryLog:
    """Recorded run. Arrays are indexed [step, agent]; step k holds the state after k+1 updates."""

    dt: float
    radius: float
    goals: np.ndarray
    initial: np.ndarray  # (M, 4): x, y, psi, v
    states: np.ndarray  # (N, M, 4)
    velocities: np.ndarray  # (N, M, 2)
    actions: np.ndarray  # (N, M, 2) applied
    combined: np.ndarray  # (N, M, 2) pre-projection
    status: np.ndarray  # (N, M) str
    events: list[dict] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.states)

    @property
    def n_agents(self) -> int:
        return len(self.initial)


@dataclass
class RunMetrics:
    min_pairwise_distance: float
    collisions: int
    arrival_times: list
    deadlocked: bool
    mean_smoothness: float
    qp_status_counts: dict
    steps: int
    all_arrived: bool

    def to_dict(self) -> dict:
        return dict(
            min_pairwise_distance=self.min_pairwise_distance,
            collisions=self.collisions,
            arrival_times=self.arrival_times,
            deadlocked=self.deadlocked,
            mean_smoothness=self.mean_smoothness,
            qp_status_counts=self.qp_status_counts,
            steps=self.steps,
            all_arrived=self.all_arrived,
        )


def _state_row(s: AgentState) -> list[float]:
    return [s.x, s.y, s.psi, s.v]


def _min_pair(pos: np.ndarray) -> float:
    if len(pos) < 2:
        return math.inf
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(len(pos), 1)
    return float(d[iu].min())


def compute_metrics(log: TrajectoryLog) -> RunMetrics:
    """Metrics from a log alone."""
    frames = [log.initial[:, :2]] + [log.states[k, :, :2] for k in range(log.n_steps)]
    mins = [_min_pair(f) for f in frames]
    collisions = sum(1 for d in mins if d < 2.0 * log.radius)
    arrival = [None] * log.n_agents
    deadlocked = False
    for e in log.events:
        if e["kind"] == "arrival":
            arrival[e["agent"]] = e["time_s"]
        elif e["kind"] == "deadlock":
            deadlocked = True
    psi = np.vstack([log.initial[None, :, 2], log.states[:, :, 2]]) if log.n_steps else log.initial[None, :, 2]
    dpsi = np.abs((np.diff(psi, axis=0) + math.pi) % (2 * math.pi) - math.pi)
    moving = log.status != ARRIVED if log.n_steps else np.zeros((0, log.n_agents), bool)
    smooth = float(dpsi[moving].mean()) if moving.any() else 0.0
    counts: dict = {}
    for s in log.status.ravel():
        counts[str(s)] = counts.get(str(s), 0) + 1
    return RunMetrics(
        min_pairwise_distance=float(min(mins)),
        collisions=collisions,
        arrival_times=arrival,
        deadlocked=deadlocked,
        mean_smoothness=smooth,
        qp_status_counts=dict(sorted(counts.items())),
        steps=log.n_steps,
        all_arrived=all(t is not None for t in arrival),
    )


def run(sc: Scenario, policy: Policy, max_steps: int | None = None, workers: int = 1) -> tuple[TrajectoryLog, RunMetrics]:
    """Step the world until every agent arrives, a deadlock is detected, or the step cap is hit."""
    max_steps = sc.max_steps if max_steps is None else max_steps
    states = list(sc.agents)
    goals = sc.goals
    M = len(states)
    events: list[dict] = []
    arrived = np.zeros(M, bool)

    def check_arrivals(k: int) -> None:
        for i, s in enumerate(states):
            if not arrived[i] and math.hypot(s.x - goals[i, 0], s.y - goals[i, 1]) < sc.arrival_radius:
                arrived[i] = True
                states[i] = AgentState(s.x, s.y, s.psi, 0.0, s.last_action)
                events.append(dict(step=k, time_s=k * sc.dt, agent=i, kind="arrival"))

    check_arrivals(0)
    rec_states, rec_vel, rec_act, rec_comb, rec_status = [], [], [], [], []
    goal_dist = [np.hypot(*(sc.positions() - goals).T)]
    k = 0
    while not arrived.all() and k < max_steps:
        new_states, decisions = step_world(states, goals, policy, sc, arrived, workers=workers)
        k += 1
        states[:] = new_states
        zero = ActionCmd()
        rec_act.append([[d.action.accel, d.action.steer] if d else [zero.accel, zero.steer] for d in decisions])
        rec_comb.append([[d.combined.accel, d.combined.steer] if d else [0.0, 0.0] for d in decisions])
        rec_status.append([d.status if d else ARRIVED for d in decisions])
        for i, d in enumerate(decisions):
            if d is not None and d.status != OPTIMAL:
                events.append(dict(step=k, time_s=k * sc.dt, agent=i, kind="relaxed", violation=d.max_violation))
        check_arrivals(k)
        rec_states.append([_state_row(s) for s in states])
        rec_vel.append([output(s, sc.geom).vel.tolist() for s in states])
        pos = np.array([[s.x, s.y] for s in states])
        goal_dist.append(np.hypot(*(pos - goals).T))
        if k >= DEADLOCK_WINDOW and not arrived.all():
            progress = goal_dist[k - DEADLOCK_WINDOW] - goal_dist[k]
            if np.all(progress[~arrived] <= DEADLOCK_PROGRESS):
                events.append(dict(step=k, time_s=k * sc.dt, agent=-1, kind="deadlock"))
                break

    log = TrajectoryLog(
        dt=sc.dt,
        radius=sc.geom.radius,
        goals=goals.copy(),
        initial=np.array([_state_row(s) for s in sc.agents], dtype=float).reshape(M, 4),
        states=np.array(rec_states, dtype=float).reshape(-1, M, 4),
        velocities=np.array(rec_vel, dtype=float).reshape(-1, M, 2),
        actions=np.array(rec_act, dtype=float).reshape(-1, M, 2),
        combined=np.array(rec_comb, dtype=float).reshape(-1, M, 2),
        status=np.array(rec_status, dtype=object).reshape(-1, M),
        events=events,
    )
    return log, compute_metrics(log)


def interventions(log: TrajectoryLog, threshold: float = INTERVENTION_THRESHOLD) -> np.ndarray:
    """Boolean (N, M) mask of steps where the projection moved the blended action by more than `threshold`."""
    return np.hypot(*(log.actions - log.combined).transpose(2, 0, 1)) > threshold
