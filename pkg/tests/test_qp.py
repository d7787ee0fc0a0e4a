import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_qp_oracle, kkt_residuals, min_max_violation_lp
from rlorca.dynamics import ActionCmd, AgentState, VehicleLimits, linearize_velocity_map
from rlorca.orca import HalfPlane
from rlorca.qp import OPTIMAL, RELAXED, QpProblem, relax_infeasible, solve, solve_rows, to_action_constraints

BOX = VehicleLimits()
LO, HI = BOX.lower, BOX.upper


def random_instance(rng):
    m = int(rng.integers(0, 9))
    G = rng.normal(size=(m, 2))
    h = rng.normal(size=m) * 0.5
    t = rng.uniform(-1.5, 1.5, 2)
    return t, G, h


def test_unconstrained_interior_target_is_returned():
    sol = solve_rows([0.2, -0.1], np.zeros((0, 2)), np.zeros(0), BOX)
    assert sol.status == OPTIMAL
    assert sol.action == ActionCmd(0.2, -0.1)


def test_target_outside_box_is_clipped():
    sol = solve_rows([3.0, -2.0], np.zeros((0, 2)), np.zeros(0), BOX)
    assert sol.action == ActionCmd(1.0, -0.6)


def test_single_constraint_projection():
    # a0 <= 0.5  ->  -a0 + 0.5 >= 0
    sol = solve_rows([0.9, 0.1], [[-1.0, 0.0]], [0.5], BOX)
    assert sol.status == OPTIMAL
    assert sol.action.accel == pytest.approx(0.5, abs=1e-15)
    assert sol.action.steer == pytest.approx(0.1, abs=1e-15)


def test_corner_of_two_constraints():
    # a0 + a1 <= 0 and a0 - a1 <= 0 ; target (1, 0) projects to the corner (0, 0)
    sol = solve_rows([1.0, 0.0], [[-1.0, -1.0], [-1.0, 1.0]], [0.0, 0.0], BOX)
    assert np.allclose(sol.action.as_array(), [0.0, 0.0], atol=1e-15)


def test_duplicate_and_zero_rows():
    G = [[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]
    h = [-0.2, -0.4, 1.0]
    sol = solve_rows([0.0, 0.0], G, h, BOX)
    assert sol.action.accel == pytest.approx(0.2)


def test_violated_zero_row_is_relaxed():
    sol = solve_rows([0.0, 0.0], [[0.0, 0.0]], [-1.0], BOX)
    assert sol.status == RELAXED
    assert sol.max_violation == pytest.approx(1.0)


def test_infeasible_parallel_rows_relaxed_to_midpoint():
    # a0 >= 0.6 and a0 <= 0.4 : best compromise a0 = 0.5 with violation 0.1
    sol = solve_rows([0.0, 0.3], [[1.0, 0.0], [-1.0, 0.0]], [-0.6, 0.4], BOX)
    assert sol.status == RELAXED
    assert sol.action.accel == pytest.approx(0.5, abs=1e-9)
    assert sol.max_violation == pytest.approx(0.1, abs=1e-9)
    assert sol.action.steer == pytest.approx(0.3, abs=1e-9)


def test_constraint_outside_box_relaxed():
    # a0 >= 2 cannot be met in the box
    sol = solve_rows([0.0, 0.0], [[1.0, 0.0]], [-2.0], BOX)
    assert sol.status == RELAXED
    assert sol.action.accel == pytest.approx(1.0)
    assert sol.max_violation == pytest.approx(1.0)


def test_velocity_space_problem_round_trip():
    st_ = AgentState(0, 0, 0.3, 1.0)
    lin = linearize_velocity_map(st_, ActionCmd())
    hp = HalfPlane(np.array([0.0, -1.0]), 0.2)  # v_y <= 0.2
    sol = solve(QpProblem(ActionCmd(0.5, 0.6), [hp], lin, BOX))
    assert hp.value(lin(sol.action)) >= -1e-12
    rows = to_action_constraints([hp], lin)
    assert rows[0][0] @ sol.action.as_array() + rows[0][1] >= -1e-12
    assert relax_infeasible(QpProblem(ActionCmd(0.5, 0.6), [hp], lin, BOX)).status == OPTIMAL


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kkt_property(seed):
    t, G, h = random_instance(np.random.default_rng(seed))
    sol = solve_rows(t, G, h, BOX)
    a = sol.action.as_array()
    assert BOX.contains(sol.action, tol=0.0)
    if sol.status == OPTIMAL:
        r = kkt_residuals(t, a, G, h, LO, HI)
    else:
        assert sol.max_violation == pytest.approx(min_max_violation_lp(G, h, LO, HI), abs=1e-9)
        r = kkt_residuals(t, a, G, h + sol.max_violation, LO, HI)
    assert max(r.values()) <= 1e-9


def test_grid_oracle_small_sample():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 5:
        t, G, h = random_instance(rng)
        sol = solve_rows(t, G, h, BOX)
        if sol.status != OPTIMAL:
            continue
        f_grid, _ = grid_qp_oracle(t, G, h, LO, HI, n=401)
        if not np.isfinite(f_grid):
            continue
        a = sol.action.as_array()
        f = 0.5 * float((a - t) @ (a - t))
        assert f <= f_grid + 1e-12
        assert f_grid - f <= 1e-6
        checked += 1
