import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bicycle_next_velocity_reference
from rlorca.dynamics import (
    ActionCmd,
    AgentState,
    VehicleGeom,
    VehicleLimits,
    linearize_velocity_map,
    linearize_velocity_map_fd,
    next_velocity,
    output,
    slip_angle,
    slip_angle_array,
    step,
    step_arrays,
    wrap_angle,
)
from rlorca.errors import DomainError, PreconditionError

GEOM = VehicleGeom()
LIM = VehicleLimits()

finite = st.floats(-50, 50, allow_nan=False)
speeds = st.floats(0.0, 2.0)
accels = st.floats(-1.0, 1.0)
steers = st.floats(-0.6, 0.6)
headings = st.floats(-math.pi, math.pi)


def test_slip_angle_zero_steer():
    assert slip_angle(0.0, GEOM) == 0.0


def test_slip_angle_symmetric_geometry_value():
    # l_r / (l_f + l_r) = 1/2
    assert slip_angle(0.6, GEOM) == pytest.approx(math.atan(0.5 * math.tan(0.6)), abs=1e-15)


@pytest.mark.parametrize("bad", [math.pi / 2, -math.pi / 2, 2.0, float("nan"), float("inf")])
def test_slip_angle_domain(bad):
    with pytest.raises(DomainError):
        slip_angle(bad, GEOM)


@given(steers)
def test_slip_angle_odd_and_bounded(s):
    b = slip_angle(s, GEOM)
    assert slip_angle(-s, GEOM) == -b
    assert abs(b) <= abs(s) + 1e-15


def test_straight_step():
    s = step(AgentState(0.0, 0.0, 0.0, 1.0), ActionCmd(0.0, 0.0))
    assert (s.x, s.y, s.psi, s.v) == (0.05, 0.0, 0.0, 1.0)


def test_speed_clamped_at_zero():
    s = step(AgentState(0.0, 0.0, 0.0, 0.01), ActionCmd(-1.0, 0.0))
    assert s.v == 0.0


def test_speed_clamped_at_max():
    s = step(AgentState(0.0, 0.0, 0.0, 1.99), ActionCmd(1.0, 0.0))
    assert s.v == 2.0


def test_action_outside_box_rejected():
    with pytest.raises(PreconditionError):
        step(AgentState(0, 0, 0, 1), ActionCmd(1.5, 0.0))
    with pytest.raises(PreconditionError):
        step(AgentState(0, 0, 0, 1), ActionCmd(0.0, 0.61))


def test_nonpositive_dt_rejected():
    with pytest.raises(PreconditionError):
        step(AgentState(0, 0, 0, 1), ActionCmd(), dt=0.0)


def test_wrap_angle_range_edges():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.3) == 0.3


@given(st.floats(-100, 100))
def test_wrap_angle_in_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


@given(finite, finite, headings, speeds, accels, steers)
def test_step_invariants(x, y, psi, v, a, s):
    st_ = step(AgentState(x, y, psi, v), ActionCmd(a, s))
    assert -math.pi < st_.psi <= math.pi
    assert LIM.v_min <= st_.v <= LIM.v_max
    assert st_.last_action == ActionCmd(a, s)
    # position moves by dt * v exactly
    assert math.hypot(st_.x - x, st_.y - y) == pytest.approx(0.05 * v, abs=1e-12)


@given(finite, finite, headings, speeds, steers)
def test_output_velocity_uses_last_steer(x, y, psi, v, s):
    st_ = AgentState(x, y, psi, v, ActionCmd(0.0, s))
    out = output(st_)
    beta = slip_angle(s, GEOM)
    assert np.allclose(out.vel, [v * math.cos(psi + beta), v * math.sin(psi + beta)], atol=1e-14)
    assert np.linalg.norm(out.vel) == pytest.approx(v, abs=1e-12)


@given(headings, speeds, accels, steers)
def test_next_velocity_matches_stepped_output(psi, v, a, s):
    st_ = AgentState(1.0, 2.0, psi, v)
    nxt = step(st_, ActionCmd(a, s))
    assert np.allclose(next_velocity(st_, ActionCmd(a, s)), output(nxt).vel, atol=1e-12)


@given(headings, speeds, accels, steers)
def test_next_velocity_reference(psi, v, a, s):
    ref = bicycle_next_velocity_reference(0.0, 0.0, psi, v, a, s, 0.5, 0.5, 0.05, 0.0, 2.0)
    assert np.allclose(next_velocity(AgentState(0, 0, psi, v), ActionCmd(a, s)), ref, atol=1e-13)


def test_vectorized_step_matches_scalar():
    rng = np.random.default_rng(3)
    n = 200
    x, y = rng.uniform(-5, 5, n), rng.uniform(-5, 5, n)
    psi, v = rng.uniform(-math.pi, math.pi, n), rng.uniform(0, 2, n)
    a, s = rng.uniform(-1, 1, n), rng.uniform(-0.6, 0.6, n)
    xs, ys, ps, vs = step_arrays(x, y, psi, v, a, s, GEOM, 0.05, LIM)
    for k in range(n):
        ref = step(AgentState(x[k], y[k], psi[k], v[k]), ActionCmd(a[k], s[k]))
        assert np.allclose([xs[k], ys[k], ps[k], vs[k]], [ref.x, ref.y, ref.psi, ref.v], atol=1e-13)
    assert np.allclose(slip_angle_array(s, GEOM), [slip_angle(q, GEOM) for q in s], atol=1e-15)


def test_linearization_exact_at_reference():
    st_ = AgentState(0.0, 0.0, 0.4, 1.2, ActionCmd(0.1, 0.2))
    ref = ActionCmd(0.3, -0.1)
    lin = linearize_velocity_map(st_, ref)
    assert np.allclose(lin(ref), next_velocity(st_, ref), atol=1e-14)


def test_linearization_accel_column_at_rest():
    # at rest with zero accel the agent can still speed up: dv/da = dt
    lin = linearize_velocity_map(AgentState(0, 0, 0.0, 0.0), ActionCmd(0.0, 0.0))
    assert lin.A_v[0, 0] == pytest.approx(0.05)
    assert lin.A_v[1, 0] == pytest.approx(0.0)


def test_linearization_rejects_reference_outside_box():
    with pytest.raises(PreconditionError):
        linearize_velocity_map(AgentState(0, 0, 0, 1), ActionCmd(0, 0.7))


@settings(max_examples=200)
@given(headings, st.floats(0.1, 1.9), st.floats(-0.99, 0.99), st.floats(-0.59, 0.59))
def test_linearization_matches_finite_differences(psi, v, a, s):
    st_ = AgentState(0.0, 0.0, psi, v)
    ref = ActionCmd(a, s)
    A = linearize_velocity_map(st_, ref).A_v
    A_fd = linearize_velocity_map_fd(st_, ref).A_v
    assert np.linalg.norm(A - A_fd) <= 1e-6 * max(np.linalg.norm(A), 1e-12)


def test_invalid_geometry_and_limits():
    with pytest.raises(DomainError):
        VehicleGeom(l_f=0.0)
    with pytest.raises(DomainError):
        VehicleLimits(accel_min=1.0, accel_max=-1.0)
