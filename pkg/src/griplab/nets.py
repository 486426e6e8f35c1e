"""Policy/value network over the grouped observation vector.

The 3023-dim observation is scaled per block to O(1) magnitudes, split
into five groups (hand state, global voxels, local voxels, object
geometry, task state), passed through one tanh encoder each, then a
two-layer tanh trunk with separate policy-mean and value heads. The
action log-std is a free parameter vector shared across states.

With encoder_bypass=True the non-voxel groups skip their encoders and
feed the trunk raw (still scaled); the two voxel encoders are kept since
2610 raw occupancy bits would swamp the trunk. This is the ablation knob
for measuring what the intermediate encodings contribute.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .sensing import OBS_DIM, OBS_LAYOUT, block_slice

N_ACTIONS = 23

# per-block input scale: brings typical magnitudes near unity
BLOCK_SCALE = {
    "h_positions": 10.0,
    "h_angles": 1.0,
    "h_lin_vel": 1.0,
    "h_dof_vel": 0.2,
    "h_dof_acc": 0.02,
    "o_gravity": 1.0 / 9.81,
    "o_gvs": 1.0,
    "o_lvs": 1.0,
    "o_closest": 0.3,
    "o_normals": 1.0,
    "t_forces": 0.2,
    "t_trigger": 1.0,
    "t_prev_action": 1.0,
}


def obs_scale_vector() -> np.ndarray:
    scale = np.empty(OBS_DIM)
    off = 0
    for name, n in OBS_LAYOUT:
        scale[off : off + n] = BLOCK_SCALE[name]
        off += n
    return scale


def _group_slices() -> dict:
    h = slice(block_slice("h_positions").start, block_slice("h_dof_acc").stop)
    t = slice(block_slice("t_forces").start, block_slice("t_prev_action").stop)
    return {
        "h": h,
        "gravity": block_slice("o_gravity"),
        "gvs": block_slice("o_gvs"),
        "lvs": block_slice("o_lvs"),
        "geom": slice(block_slice("o_closest").start, block_slice("o_normals").stop),
        "t": t,
    }


GROUPS = _group_slices()
ENC_WIDTHS = {"h": 128, "gvs": 64, "lvs": 128, "o_rest": 64, "t": 64}
TRUNK_WIDTHS = (256, 128)
LOG_STD_INIT = float(np.log(0.2))  # gentle initial exploration; violent target jumps eject the object


def orthogonal(rng, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


@dataclass
class NetConfig:
    encoder_bypass: bool = False
    dtype: type = np.float32
    # raw-space bias for the policy mean head; None keeps zeros (mid-range
    # targets). The trainer passes a slightly-open posture so a fresh policy
    # holds still at release instead of snapping to a half fist.
    mean_bias: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "encoder_bypass": self.encoder_bypass,
            "dtype": np.dtype(self.dtype).name,
            "mean_bias": list(self.mean_bias) if self.mean_bias is not None else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetConfig":
        mb = d.get("mean_bias")
        return NetConfig(
            encoder_bypass=bool(d["encoder_bypass"]),
            dtype=np.dtype(d["dtype"]).type,
            mean_bias=tuple(mb) if mb is not None else None,
        )


class PolicyValueNet:
    """Parameter container plus the forward graph builder."""

    def __init__(self, config: NetConfig = None, seed: int = 0):
        self.config = config or NetConfig()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 777]))
        dt = self.config.dtype
        self.scale = obs_scale_vector().astype(dt)
        self.params: dict[str, ad.Tensor] = {}

        def lin(name, n_in, n_out, gain):
            self.params[f"{name}_w"] = ad.parameter(orthogonal(rng, n_in, n_out, gain), dtype=dt)
            self.params[f"{name}_b"] = ad.parameter(np.zeros(n_out), dtype=dt)

        g = np.sqrt(2.0)
        sizes = {
            "h": GROUPS["h"].stop - GROUPS["h"].start,
            "gvs": GROUPS["gvs"].stop - GROUPS["gvs"].start,
            "lvs": GROUPS["lvs"].stop - GROUPS["lvs"].start,
            "o_rest": (GROUPS["gravity"].stop - GROUPS["gravity"].start)
            + (GROUPS["geom"].stop - GROUPS["geom"].start),
            "t": GROUPS["t"].stop - GROUPS["t"].start,
        }
        trunk_in = 0
        for key, width in ENC_WIDTHS.items():
            if self.config.encoder_bypass and key not in ("gvs", "lvs"):
                trunk_in += sizes[key]
            else:
                lin(f"enc_{key}", sizes[key], width, g)
                trunk_in += width
        self.trunk_in = trunk_in
        lin("trunk0", trunk_in, TRUNK_WIDTHS[0], g)
        lin("trunk1", TRUNK_WIDTHS[0], TRUNK_WIDTHS[1], g)
        lin("policy", TRUNK_WIDTHS[1], N_ACTIONS, 0.01)
        lin("value", TRUNK_WIDTHS[1], 1, 1.0)
        if self.config.mean_bias is not None:
            mb = np.asarray(self.config.mean_bias, dtype=np.float64)
            if mb.shape != (N_ACTIONS,):
                raise ValueError(f"mean_bias must have shape ({N_ACTIONS},), got {mb.shape}")
            self.params["policy_b"] = ad.parameter(mb, dtype=dt)
        self.params["log_std"] = ad.parameter(np.full(N_ACTIONS, LOG_STD_INIT), dtype=dt)

    # ------------------------------------------------------------------ api

    def param_list(self):
        return [self.params[k] for k in sorted(self.params)]

    def _linear(self, name: str, x: ad.Tensor) -> ad.Tensor:
        return (x @ self.params[f"{name}_w"]) + self.params[f"{name}_b"]

    def forward(self, obs: np.ndarray):
        """obs (B,3023) -> (mean (B,23), log_std (23,), value (B,))."""
        obs = np.atleast_2d(np.asarray(obs))
        x = ad.Tensor((obs * self.scale).astype(self.config.dtype))

        def enc(key, t):
            if self.config.encoder_bypass and key not in ("gvs", "lvs"):
                return t
            return self._linear(f"enc_{key}", t).tanh()

        o_rest = ad.concat([x[:, GROUPS["gravity"]], x[:, GROUPS["geom"]]], axis=1)
        feats = ad.concat(
            [
                enc("h", x[:, GROUPS["h"]]),
                enc("gvs", x[:, GROUPS["gvs"]]),
                enc("lvs", x[:, GROUPS["lvs"]]),
                enc("o_rest", o_rest),
                enc("t", x[:, GROUPS["t"]]),
            ],
            axis=1,
        )
        z = self._linear("trunk0", feats).tanh()
        z = self._linear("trunk1", z).tanh()
        mean = self._linear("policy", z)
        value = self._linear("value", z)[:, 0]
        return mean, self.params["log_std"], value

    # ----------------------------------------------------------- checkpoint

    def state_dict(self) -> dict:
        return {k: np.array(v.data) for k, v in self.params.items()}

    def load_state_dict(self, state: dict):
        for k, v in self.params.items():
            arr = np.asarray(state[k], dtype=v.data.dtype)
            if arr.shape != v.data.shape:
                raise ValueError(f"param {k}: shape {arr.shape} != {v.data.shape}")
            v.data = arr
