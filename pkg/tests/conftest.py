import numpy as np
import pytest

from griplab import kernels
from griplab.hand import default_skeleton
from griplab.physics import ObjectState


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


def random_object(rng, shape=None, kinematic=False) -> ObjectState:
    shape = int(rng.integers(3)) if shape is None else shape
    base = {
        kernels.SPHERE: np.array([0.03, 0.03, 0.03]),
        kernels.CUBE: np.array([0.025, 0.025, 0.025]),
        kernels.CYLINDER: np.array([0.025, 0.025, 0.04]),
    }[shape]
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return ObjectState(
        shape=shape,
        half_ext=base * rng.uniform(0.5, 1.5, size=3),
        pos=rng.uniform(-0.05, 0.05, size=3),
        quat=q,
        vel=np.zeros(3),
        omega=np.zeros(3),
        kinematic=kinematic,
    )


def inside_oracle(obj: ObjectState, pts: np.ndarray) -> np.ndarray:
    """Reference inside test, written against the shape definitions only."""
    from griplab.geometry import quat_to_matrix

    R = quat_to_matrix(obj.quat)
    local = (np.atleast_2d(pts) - obj.pos) @ R
    a, b, c = obj.half_ext
    if obj.shape == kernels.SPHERE:
        return (local[:, 0] / a) ** 2 + (local[:, 1] / b) ** 2 + (local[:, 2] / c) ** 2 <= 1.0
    if obj.shape == kernels.CUBE:
        return np.all(np.abs(local) <= obj.half_ext[None, :], axis=1)
    radial = (local[:, 0] / a) ** 2 + (local[:, 1] / b) ** 2
    return (radial <= 1.0) & (np.abs(local[:, 2]) <= c)
