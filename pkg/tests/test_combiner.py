import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import pseudo_distance_reference
from rlorca.combiner import CombinerConfig, combine, combine_array, neighbor_weight, pseudo_distance, weight
from rlorca.dynamics import ActionCmd
from rlorca.errors import DomainError, PreconditionError

CFG = CombinerConfig()
vec = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


def test_neighbor_moving_away_uses_euclidean_distance():
    # p_rel points from the neighbor to the ego agent; velocity opposite
    assert pseudo_distance([3.0, 4.0], [-1.0, 0.0], CFG) == 5.0


def test_branch_boundary_is_euclidean():
    # p_rel . v = 0 exactly: the perpendicular case sits on the boundary
    assert pseudo_distance([0.0, 2.0], [1.5, 0.0], CFG) == 2.0
    assert pseudo_distance([3.0, 4.0], [4.0, -3.0], CFG) == 5.0


def test_stationary_neighbor_is_euclidean():
    assert pseudo_distance([3.0, 4.0], [0.0, 0.0], CFG) == 5.0
    assert pseudo_distance([3.0, 4.0], [1e-7, 0.0], CFG) == 5.0


def test_approaching_neighbor_shrinks_along_component():
    D = pseudo_distance([4.0, 0.0], [2.0, 0.0], CFG)
    assert D == pytest.approx(4.0 * math.exp(-0.4 * 2.0), rel=1e-15)


@given(vec, vec)
def test_matches_reference_and_bounded(p, v):
    D = pseudo_distance(p, v, CFG)
    assert D == pytest.approx(pseudo_distance_reference(p, v, CFG.beta_w), abs=1e-9)
    assert D <= math.hypot(*p) * (1 + 1e-12) + 1e-12


def test_weight_values_and_domain():
    assert weight(1.0, 1.0) == pytest.approx(math.exp(-1.0))
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            weight(bad, 1.0)


def test_weight_floor():
    w = neighbor_weight([0.0, 0.0], [0.0, 0.0], CFG)
    assert w == CFG.max_weight
    assert math.isfinite(w)


@given(st.floats(0.01, 20), st.floats(0.01, 20))
def test_weight_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert weight(lo, 1.0) >= weight(hi, 1.0)


def test_combine_single_and_equal():
    a = ActionCmd(0.3, -0.2)
    assert combine([a], [0.7]) == a
    assert combine([a, a, a], [1, 2, 3]) == a


def test_combine_weighted_mean():
    out = combine([ActionCmd(1.0, 0.0), ActionCmd(0.0, 0.5)], [3.0, 1.0])
    assert out.accel == pytest.approx(0.75)
    assert out.steer == pytest.approx(0.125)


def test_combine_preconditions():
    with pytest.raises(PreconditionError):
        combine([], [])
    with pytest.raises(PreconditionError):
        combine([ActionCmd()], [0.0])
    with pytest.raises(PreconditionError):
        combine([ActionCmd()], [1.0, 2.0])


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-0.6, 0.6), st.floats(1e-6, 1e3)), min_size=1, max_size=10))
def test_combine_inside_hull(rows):
    acts = np.array([[a, s] for a, s, _ in rows])
    w = np.array([w for _, _, w in rows])
    out = combine_array(acts, w)
    assert np.all(out >= acts.min(axis=0)) and np.all(out <= acts.max(axis=0))


def test_invalid_config():
    with pytest.raises(DomainError):
        CombinerConfig(alpha=0.0)
