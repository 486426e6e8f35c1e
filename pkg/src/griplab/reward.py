"""Reward terms for grip-force tracking and finger proximity.

Force reward: r_f = exp(-(sum_k ||f_k|| - f_target)^2) with forces in kgf
and f_target = f_max * mean(trigger history), f_max = 10 kgf.

Proximity reward: r_p = sum_j w_j exp(-0.07 ||c_j||^2) over the 23 query
points with c in centimeters, so a point 1 cm from the surface scores
just above 0.9 before weighting. Fingertips and their distal joints get
weight 0.0625, the other 13 points 0.03125 (weights sum to 1.03125 and
are deliberately not renormalized).

Total reward is the plain sum. Early termination fires when the object
center strays more than 10 cm from the wrist origin; the default adds
half the object's largest extent as slack so the rule reads "escaped the
hand region" for bulky objects, strict mode applies the raw 10 cm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hand import N_JOINTS, N_TIPS

F_MAX_KGF = 10.0
PROXIMITY_SCALE = 0.07
TERMINATION_DISTANCE = 0.10

# query order: 17 joints, 5 tips, palm center. High-weight set = the 5
# fingertips plus their immediate parent joints (thumb IP and the DIPs).
_DISTAL_JOINTS = (4, 7, 10, 13, 16)


def default_weights() -> np.ndarray:
    w = np.full(N_JOINTS + N_TIPS + 1, 0.03125)
    w[list(_DISTAL_JOINTS)] = 0.0625
    w[N_JOINTS : N_JOINTS + N_TIPS] = 0.0625
    return w


@dataclass
class RewardWeights:
    proximity: np.ndarray = field(default_factory=default_weights)
    f_max: float = F_MAX_KGF
    force_scale: float = 1.0
    proximity_exponent: float = PROXIMITY_SCALE

    def __post_init__(self):
        if not np.all(self.proximity > 0):
            raise ValueError("proximity weights must be positive")
        if not self.f_max > 0:
            raise ValueError("f_max must be positive")


def target_force(trigger_history: np.ndarray, f_max: float = F_MAX_KGF) -> float:
    """f_max times the mean of the 6-frame trigger history, in kgf."""
    h = np.asarray(trigger_history, dtype=np.float64)
    if h.shape != (6,):
        raise ValueError("trigger history must hold 6 values")
    if np.any(h < 0.0) or np.any(h > 1.0):
        raise ValueError("trigger values must lie in [0, 1]")
    return float(f_max * h.mean())


def force_reward(collider_forces_kgf: np.ndarray, target_kgf: float, scale: float = 1.0) -> float:
    """exp(-scale * (total force magnitude - target)^2), in (0, 1]."""
    f = np.asarray(collider_forces_kgf, dtype=np.float64)
    total = float(np.linalg.norm(f, axis=-1).sum()) if f.size else 0.0
    err = total - target_kgf
    return float(np.exp(-scale * err * err))


def total_force_kgf(collider_forces_kgf: np.ndarray) -> float:
    f = np.asarray(collider_forces_kgf, dtype=np.float64)
    if f.size == 0:
        return 0.0
    return float(np.linalg.norm(f, axis=-1).sum())


def proximity_reward(c_cm: np.ndarray, weights: np.ndarray = None) -> float:
    """Weighted sum of exp(-0.07 ||c_j||^2) with c in centimeters."""
    c = np.asarray(c_cm, dtype=np.float64).reshape(-1, 3)
    if weights is None:
        weights = default_weights()
    if c.shape[0] != weights.shape[0]:
        raise ValueError("query point count does not match weight count")
    d2 = np.sum(c * c, axis=1)
    return float(np.sum(weights * np.exp(-PROXIMITY_SCALE * d2)))


def total_reward(r_f: float, r_p: float) -> float:
    return r_f + r_p


def should_terminate(
    obj_pos: np.ndarray,
    hand_pos: np.ndarray,
    largest_extent: float = 0.0,
    strict: bool = False,
) -> bool:
    """True iff the object center left the hand region (10 cm + slack).

    hand_pos is the reference point on the hand; episode code passes the
    palm-center marker so the ball can rest anywhere in the spawn volume
    without tripping the check. Default slack is half the largest extent,
    strict mode drops it.
    """
    d = float(np.linalg.norm(np.asarray(obj_pos) - np.asarray(hand_pos)))
    slack = 0.0 if strict else 0.5 * largest_extent
    return d > TERMINATION_DISTANCE + slack
