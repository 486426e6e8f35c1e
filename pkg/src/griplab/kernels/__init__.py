"""Hot-path kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``griplab.kernels._ext``, built from Cython) is
preferred; if it is missing the numpy implementation is used instead.
Set ``GRIPLAB_BACKEND=numpy`` to force the fallback or
``GRIPLAB_BACKEND=ext`` to require the extension.

Both backends expose the same functions:

- ``closest_points``    surface point / outward normal / signed distance
- ``occupancy``         cell-center inside tests for voxel sensors
- ``capsule_closest``   per-segment nearest approach to an object
- ``fk_hand``           forward kinematics over the packed skeleton
- ``contact_sweep``     stabilized penalty contact impulse pass
"""
from __future__ import annotations

import os

SPHERE = 0
CUBE = 1
CYLINDER = 2

_requested = os.environ.get("GRIPLAB_BACKEND", "auto").strip().lower()

if _requested in ("numpy", "pure", "fallback"):
    from . import numpy_backend as _impl

    BACKEND = "numpy"
elif _requested in ("auto", "", "ext", "compiled"):
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]

        BACKEND = "ext"
    except ImportError:
        if _requested in ("ext", "compiled"):
            raise
        from . import numpy_backend as _impl

        BACKEND = "numpy"
else:
    raise ValueError(f"unknown GRIPLAB_BACKEND={_requested!r}")

closest_points = _impl.closest_points
occupancy = _impl.occupancy
capsule_closest = _impl.capsule_closest
fk_hand = _impl.fk_hand
contact_sweep = _impl.contact_sweep


def get_backend(name: str):
    """Return a backend module by name ('numpy' or 'ext'); used by the benchmark."""
    if name == "numpy":
        from . import numpy_backend

        return numpy_backend
    if name == "ext":
        from . import _ext  # type: ignore[attr-defined]

        return _ext
    raise ValueError(f"unknown backend {name!r}")
