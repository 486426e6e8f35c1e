"""Reward math against hand-computed values, plus shape properties."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from griplab.reward import (
    F_MAX_KGF,
    TERMINATION_DISTANCE,
    RewardWeights,
    default_weights,
    force_reward,
    proximity_reward,
    should_terminate,
    target_force,
    total_force_kgf,
    total_reward,
)

TOL = 1e-9


# ----------------------------------------------------------- force reward

def test_force_reward_examples():
    # sum 6 kgf against target 5 -> e^-1; zero force against 10 -> e^-100
    assert abs(force_reward(np.array([6.0]), 5.0) - np.exp(-1.0)) < TOL
    assert abs(force_reward(np.array([0.0]), 10.0) - np.exp(-100.0)) < TOL
    # per-collider vectors: magnitudes add before the comparison
    assert abs(force_reward(np.array([[2.0, 0, 0], [0, 3.0, 0]]), 5.0) - 1.0) < TOL


def test_force_reward_peak_at_target():
    assert force_reward(np.array([7.3]), 7.3) == pytest.approx(1.0, abs=TOL)


@given(st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=200, deadline=None)
def test_force_reward_bounded_and_symmetric(total, target):
    r = force_reward(np.array([total]), target)
    assert 0.0 <= r <= 1.0
    mirror = 2 * target - total
    if mirror >= 0:  # magnitudes fold negative totals, skip those
        assert abs(r - force_reward(np.array([mirror]), target)) < 1e-12


def test_force_reward_monotone_away_from_target():
    vals = [force_reward(np.array([5.0 + d]), 5.0) for d in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


# ----------------------------------------------------------- target force

def test_target_force_from_history():
    # mean of the 6-sample window times the 10 kgf ceiling
    hist = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    assert abs(target_force(hist) - 5.0) < TOL
    assert abs(target_force(np.ones(6)) - F_MAX_KGF) < TOL
    assert abs(target_force(np.zeros(6))) < TOL


def test_target_force_rejects_wrong_length():
    with pytest.raises(ValueError):
        target_force(np.ones(5))


def test_total_force_is_magnitude_sum():
    forces = np.array([[3.0, 0.0, 0.0], [0.0, 4.0, 0.0]])
    assert abs(total_force_kgf(forces) - 7.0) < TOL


# ------------------------------------------------------- proximity reward

def test_proximity_reward_all_touching():
    # every query point on the surface: full weight sum 10*0.0625 + 13*0.03125
    c = np.zeros((23, 3))
    assert abs(proximity_reward(c) - 1.03125) < TOL


def test_proximity_reward_single_point_one_cm():
    w = default_weights()
    c = np.zeros((23, 3))
    c[0] = [1.0, 0.0, 0.0]  # cm
    base = 1.03125 - w[0] + w[0] * np.exp(-0.07)
    assert abs(proximity_reward(c) - base) < TOL
    # one centimeter away still earns the >0.9 per-point factor
    assert np.exp(-0.07 * 1.0**2) > 0.9


def test_proximity_reward_monotone_in_distance():
    vals = []
    for d in (0.0, 0.5, 1.0, 2.0, 5.0):
        c = np.full((23, 3), 0.0)
        c[:, 0] = d
        vals.append(proximity_reward(c))
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_proximity_weights_sum():
    w = default_weights()
    assert w.shape == (23,)
    assert abs(w.sum() - 1.03125) < TOL
    assert np.isclose(w, 0.0625).sum() == 10
    assert np.isclose(w, 0.03125).sum() == 13


def test_custom_weights_respected():
    c = np.zeros((23, 3))
    assert abs(proximity_reward(c, np.full(23, 0.5)) - 11.5) < TOL


def test_reward_weights_validated():
    with pytest.raises(ValueError):
        RewardWeights(proximity=np.zeros(23))
    with pytest.raises(ValueError):
        RewardWeights(f_max=0.0)


# ----------------------------------------------------------- total reward

def test_total_reward_is_sum():
    rf = force_reward(np.array([6.0]), 5.0)
    rp = proximity_reward(np.zeros((23, 3)))
    assert abs(total_reward(rf, rp) - (np.exp(-1.0) + 1.03125)) < TOL


# ------------------------------------------------------------ termination

def test_termination_strict_thresholds():
    hand = np.zeros(3)
    # 9 cm: inside; 11 cm: out (strict ignores the extent slack)
    assert not should_terminate(np.array([0.09, 0, 0]), hand, 0.30, strict=True)
    assert should_terminate(np.array([0.11, 0, 0]), hand, 0.30, strict=True)


def test_termination_slack_uses_half_extent():
    hand = np.zeros(3)
    # largest extent 8 cm -> slack 4 cm -> threshold 14 cm
    assert not should_terminate(np.array([0.13, 0, 0]), hand, 0.08)
    assert should_terminate(np.array([0.141, 0, 0]), hand, 0.08)


def test_termination_boundary_not_triggered():
    hand = np.zeros(3)
    assert not should_terminate(np.array([TERMINATION_DISTANCE, 0, 0]), hand, 0.0, strict=True)


@given(
    st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
    st.floats(0.0, 0.2),
)
@settings(max_examples=300, deadline=None)
def test_termination_strict_implies_relaxed_fires_later(x, y, z, extent):
    obj = np.array([x, y, z])
    hand = np.zeros(3)
    if should_terminate(obj, hand, extent):
        assert should_terminate(obj, hand, extent, strict=True)
