import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import min_disc_distance, min_disc_distance_sampled
from rlorca.dynamics import OutputObs, VehicleGeom
from rlorca.errors import DegenerateGeometryError, DomainError
from rlorca.orca import OrcaConfig, constraints_for_agent, halfplane_for_pair, neighbor_indices

coord = st.floats(-5, 5)
vel = st.floats(-2, 2)


def obs(x, y, vx=0.0, vy=0.0):
    return OutputObs(np.array([x, y], float), np.array([vx, vy], float))


def test_head_on_normal_is_sideways_and_current_velocity_excluded():
    a, b = obs(0, 0, 1, 0), obs(4, 0, -1, 0)
    hp = halfplane_for_pair(a, b, 1.0, 3.0)
    assert not hp.admits(a.vel)
    # leg constraint: the boundary is tilted off the head-on axis
    assert abs(hp.normal[1]) > 0.1


def test_tie_on_cutoff_centre_pushes_back_along_line_of_centres():
    # relative velocity equals p_rel / T exactly
    a, b = obs(0, 0, 1, 0), obs(4, 0, -1, 0)
    hp = halfplane_for_pair(a, b, 1.0, 2.0)
    assert np.allclose(hp.normal, [-1.0, 0.0])
    assert not hp.admits(a.vel)


def test_far_apart_slow_agents_unconstrained():
    a, b = obs(0, 0, 0.1, 0), obs(50, 0, 0, 0)
    hp = halfplane_for_pair(a, b, 1.0, 2.0)
    assert hp.admits(a.vel)


def test_reciprocity_shares_are_symmetric():
    # each agent takes half: the two offsets from the current velocities are mirror images
    a, b = obs(-2, 0.3, 1, 0), obs(2, -0.3, -1, 0)
    ha = halfplane_for_pair(a, b, 1.0, 2.0)
    hb = halfplane_for_pair(b, a, 1.0, 2.0)
    assert np.allclose(ha.normal, -hb.normal, atol=1e-12)
    assert ha.value(a.vel) == pytest.approx(hb.value(b.vel), abs=1e-12)


def test_coincident_positions_raise():
    with pytest.raises(DegenerateGeometryError):
        halfplane_for_pair(obs(1, 1), obs(1, 1), 1.0, 2.0)


def test_coincident_positions_handled_per_agent():
    cfg = OrcaConfig()
    planes = constraints_for_agent(obs(1, 1), [obs(1, 1)], VehicleGeom(), cfg, agent_index=3)
    assert len(planes) == 1
    assert np.isfinite(planes[0].normal).all()


def test_invalid_parameters():
    with pytest.raises(DomainError):
        halfplane_for_pair(obs(0, 0), obs(3, 0), 0.0, 2.0)
    with pytest.raises(DomainError):
        OrcaConfig(radius_inflation=0.9)


def test_neighbor_cutoff_and_order():
    cfg = OrcaConfig(horizon_T=2.0, max_neighbors_K=2, v_max=2.0)
    own = obs(0, 0)
    eps = 1e-9
    others = [obs(8.0 + eps, 0), obs(3, 0), obs(0, 3), obs(1, 0), obs(8.0, 0)]
    assert neighbor_indices(own, others, cfg) == [3, 1]
    cfg_all = OrcaConfig(horizon_T=2.0, max_neighbors_K=10, v_max=2.0)
    # excluded just beyond 2 v_max T, ties kept in input order
    assert neighbor_indices(own, others, cfg_all) == [3, 1, 2, 4]


def test_overlapping_agents_constraint_separates_in_one_step():
    a, b = obs(0, 0, 0, 0), obs(0.5, 0, 0, 0)
    hp = halfplane_for_pair(a, b, 1.0, 2.0, time_step=0.05)
    # moving away from b at the boundary velocity is admitted
    assert hp.admits(-hp.normal * 0.0 + np.array([-10.0, 0.0]))
    assert not hp.admits(np.array([0.0, 0.0]))


@given(coord, coord, coord, coord, vel, vel, vel, vel, st.floats(0.5, 2.0), st.floats(0.5, 4.0))
def test_theorem_property(px, py, qx, qy, v1, v2, v3, v4, R, T):
    """Velocities on or inside both half-planes keep the discs apart over [0, T]."""
    p_i, p_j = np.array([px, py]), np.array([qx, qy])
    assume(np.linalg.norm(p_i - p_j) > R * (1 + 1e-6))
    a, b = OutputObs(p_i, np.array([v1, v2])), OutputObs(p_j, np.array([v3, v4]))
    hi = halfplane_for_pair(a, b, R, T)
    hj = halfplane_for_pair(b, a, R, T)
    # project each current velocity onto its own admissible set
    ui = a.vel - min(0.0, hi.value(a.vel)) * hi.normal
    uj = b.vel - min(0.0, hj.value(b.vel)) * hj.normal
    assert hi.value(ui) >= -1e-12 and hj.value(uj) >= -1e-12
    assert min_disc_distance(p_j - p_i, ui - uj, T) >= R - 1e-9


def test_closed_form_distance_oracle_agrees_with_sampling():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p, w, T = rng.normal(size=2) * 3, rng.normal(size=2) * 2, rng.uniform(0.5, 4)
        assert min_disc_distance(p, w, T) <= min_disc_distance_sampled(p, w, T) + 1e-12
        assert min_disc_distance(p, w, T) == pytest.approx(min_disc_distance_sampled(p, w, T), abs=1e-3)
