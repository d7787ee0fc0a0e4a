"""Safe-action projection.

Finds the action closest to the blended action subject to the ORCA rows
mapped into action space and the action box. With two decision variables
the optimum has at most two active constraints, so every candidate
(unconstrained point, projection onto one line, intersection of two
lines) is enumerated and the best feasible one kept.

If the rows and the box have no common point, the least-violation
action is returned instead: minimize the largest row violation over the
box, then take the point closest to the target among the minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rlorca.dynamics import ActionCmd, VehicleLimits, VelocityLinearization
from rlorca.orca import HalfPlane

OPTIMAL = "optimal"
RELAXED = "relaxed"

_ZERO_ROW = 1e-12
_DUP_TOL = 1e-12
_FEAS_TOL = 1e-10
_DET_TOL = 1e-12


@dataclass(frozen=True)
class QpProblem:
    target: ActionCmd
    halfplanes: Sequence[HalfPlane]
    lin: VelocityLinearization
    box: VehicleLimits


@dataclass(frozen=True)
class QpSolution:
    action: ActionCmd
    status: str
    max_violation: float


def to_action_constraints(halfplanes: Sequence[HalfPlane], lin: VelocityLinearization) -> list[tuple[np.ndarray, float]]:
    """Map velocity rows n.v + c >= 0 through v = A_v a + b_v."""
    return [(hp.normal @ lin.A_v, float(hp.normal @ lin.b_v + hp.offset)) for hp in halfplanes]


def _row_arrays(rows) -> tuple[np.ndarray, np.ndarray]:
    G = np.array([g for g, _ in rows], dtype=float).reshape(-1, 2)
    h = np.array([c for _, c in rows], dtype=float)
    return G, h


def _box_rows(box: VehicleLimits) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = box.lower, box.upper
    G = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    h = np.array([-lo[0], hi[0], -lo[1], hi[1]])
    return G, h


def _normalized(G: np.ndarray, h: np.ndarray):
    """Unit-normal rows with duplicates and dominated parallels removed.

    Returns None when a zero row is violated by its constant term.
    """
    norms = np.hypot(G[:, 0], G[:, 1])
    zero = norms <= _ZERO_ROW
    if np.any(h[zero] < 0):
        return None
    G = G[~zero] / norms[~zero, None]
    h = h[~zero] / norms[~zero]
    keep_G, keep_h = [], []
    for g, c in zip(G, h):
        for k, kg in enumerate(keep_G):
            if abs(g[0] - kg[0]) <= _DUP_TOL and abs(g[1] - kg[1]) <= _DUP_TOL:
                keep_h[k] = min(keep_h[k], c)
                break
        else:
            keep_G.append(g)
            keep_h.append(c)
    return np.array(keep_G).reshape(-1, 2), np.array(keep_h)


def _project(target: np.ndarray, G: np.ndarray, h: np.ndarray, box: VehicleLimits, tol: float = _FEAS_TOL):
    """Closest point to `target` in {G a + h >= 0} intersected with the box, or None if empty."""
    reduced = _normalized(G, h)
    if reduced is None:
        return None
    Gb, hb = _box_rows(box)
    G = np.vstack([reduced[0], Gb])
    h = np.concatenate([reduced[1], hb])

    m = len(h)
    resid = G @ target + h
    on_line = target - resid[:, None] * G
    i, j = np.triu_indices(m, 1)
    det = G[i, 0] * G[j, 1] - G[i, 1] * G[j, 0]
    ok = np.abs(det) > _DET_TOL
    i, j, det = i[ok], j[ok], det[ok]
    # Cramer's rule for g_i.a = -h_i, g_j.a = -h_j
    ax = (-h[i] * G[j, 1] + h[j] * G[i, 1]) / det
    ay = (-G[i, 0] * h[j] + G[j, 0] * h[i]) / det
    cand = np.vstack([target[None, :], on_line, np.column_stack([ax, ay])])

    feasible = np.all(cand @ G.T + h >= -tol, axis=1)
    if not feasible.any():
        return None
    cost = np.where(feasible, ((cand - target) ** 2).sum(axis=1), np.inf)
    best = cand[int(np.argmin(cost))]
    return np.clip(best, box.lower, box.upper)


def _min_max_violation(G: np.ndarray, h: np.ndarray, box: VehicleLimits) -> tuple[float, np.ndarray]:
    """Solve min_{a in box} max_i max(0, -(G a + h)_i) as a 3-variable LP by vertex enumeration.

    Variables z = (a0, a1, s); constraints C z >= d.
    """
    Gb, hb = _box_rows(box)
    C = np.vstack(
        [
            np.column_stack([G, np.ones(len(G))]),
            np.column_stack([Gb, np.zeros(4)]),
            [[0.0, 0.0, 1.0]],
        ]
    )
    d = np.concatenate([-h, -hb, [0.0]])
    n = len(d)
    idx = np.array([(a, b, c) for a in range(n) for b in range(a + 1, n) for c in range(b + 1, n)])
    M = C[idx]
    det = np.linalg.det(M)
    ok = np.abs(det) > _DET_TOL
    M, rhs = M[ok], d[idx[ok]]
    z = np.linalg.solve(M, rhs[..., None])[..., 0]
    scale = 1.0 + np.abs(d).max()
    feasible = np.all(z @ C.T - d >= -_FEAS_TOL * scale, axis=1)
    z = z[feasible]
    k = int(np.argmin(z[:, 2]))
    return max(float(z[k, 2]), 0.0), np.clip(z[k, :2], box.lower, box.upper)


def _violation(G: np.ndarray, h: np.ndarray, a: np.ndarray) -> float:
    if len(h) == 0:
        return 0.0
    return max(0.0, float(np.max(-(G @ a + h))))


def relax_rows(target, G, h, box: VehicleLimits) -> QpSolution:
    """Least-violation action for action-space rows `G a + h >= 0`."""
    target = np.asarray(target, float)
    G = np.asarray(G, float).reshape(-1, 2)
    h = np.asarray(h, float)
    s_star, vertex = _min_max_violation(G, h, box)
    if s_star == 0.0:
        a = _project(target, G, h, box)
        if a is not None:
            return QpSolution(ActionCmd.from_array(a), OPTIMAL, 0.0)
    a = _project(target, G, h + s_star, box)
    if a is None:
        a = vertex
    # the tolerance-feasible point may sit a hair past s_star; report the larger
    viol = max(_violation(G, h, a), s_star)
    if viol == 0.0:
        return QpSolution(ActionCmd.from_array(a), OPTIMAL, 0.0)
    return QpSolution(ActionCmd.from_array(a), RELAXED, viol)


def solve_rows(target, G, h, box: VehicleLimits) -> QpSolution:
    """Project `target` onto action-space rows `G a + h >= 0` and the box."""
    target = np.asarray(target, float)
    G = np.asarray(G, float).reshape(-1, 2)
    h = np.asarray(h, float)
    a = _project(target, G, h, box)
    if a is not None:
        return QpSolution(ActionCmd.from_array(a), OPTIMAL, 0.0)
    return relax_rows(target, G, h, box)


def solve(problem: QpProblem) -> QpSolution:
    G, h = _row_arrays(to_action_constraints(problem.halfplanes, problem.lin))
    return solve_rows(problem.target.as_array(), G, h, problem.box)


def relax_infeasible(problem: QpProblem) -> QpSolution:
    G, h = _row_arrays(to_action_constraints(problem.halfplanes, problem.lin))
    return relax_rows(problem.target.as_array(), G, h, problem.box)
