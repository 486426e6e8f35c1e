"""Policy/value network construction, encoder bypass semantics, and
checkpoint round trips."""
import os

import numpy as np
import pytest

from griplab.agent import Agent, PpoConfig, load_checkpoint, save_checkpoint
from griplab.nets import (
    ENC_WIDTHS,
    GROUPS,
    LOG_STD_INIT,
    N_ACTIONS,
    TRUNK_WIDTHS,
    NetConfig,
    PolicyValueNet,
    obs_scale_vector,
    orthogonal,
)


def test_forward_shapes():
    net = PolicyValueNet(NetConfig(), seed=0)
    obs = np.random.default_rng(0).standard_normal((7, 3023))
    mean, log_std, value = net.forward(obs)
    assert mean.data.shape == (7, N_ACTIONS)
    assert log_std.data.shape == (N_ACTIONS,)
    assert value.data.shape == (7,)
    np.testing.assert_allclose(log_std.data, LOG_STD_INIT, atol=1e-6)


def test_orthogonal_init_has_orthonormal_columns():
    rng = np.random.default_rng(3)
    w = orthogonal(rng, 64, 32, gain=1.0)
    np.testing.assert_allclose(w.T @ w, np.eye(32), atol=1e-10)
    w2 = orthogonal(rng, 16, 48, gain=2.0)
    np.testing.assert_allclose(w2 @ w2.T, 4.0 * np.eye(16), atol=1e-10)


def test_seed_reproducibility():
    a = PolicyValueNet(NetConfig(), seed=5)
    b = PolicyValueNet(NetConfig(), seed=5)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k].data, b.params[k].data)
    c = PolicyValueNet(NetConfig(), seed=6)
    assert any(not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params)


def test_encoder_bypass_trunk_width_and_param_set():
    full = PolicyValueNet(NetConfig(encoder_bypass=False), seed=0)
    bypass = PolicyValueNet(NetConfig(encoder_bypass=True), seed=0)
    sizes = {
        "h": GROUPS["h"].stop - GROUPS["h"].start,
        "o_rest": (GROUPS["gravity"].stop - GROUPS["gravity"].start)
        + (GROUPS["geom"].stop - GROUPS["geom"].start),
        "t": GROUPS["t"].stop - GROUPS["t"].start,
    }
    want = sizes["h"] + sizes["o_rest"] + sizes["t"] + ENC_WIDTHS["gvs"] + ENC_WIDTHS["lvs"]
    assert bypass.trunk_in == want == 605
    assert full.trunk_in == sum(ENC_WIDTHS.values())
    # exactly the non-voxel encoders disappear
    gone = {k for k in full.params if k not in bypass.params}
    assert gone == {"enc_h_w", "enc_h_b", "enc_o_rest_w", "enc_o_rest_b", "enc_t_w", "enc_t_b"}
    assert "enc_gvs_w" in bypass.params and "enc_lvs_w" in bypass.params


def test_encoder_bypass_forward_runs():
    net = PolicyValueNet(NetConfig(encoder_bypass=True), seed=0)
    obs = np.random.default_rng(1).standard_normal((3, 3023))
    mean, _, value = net.forward(obs)
    assert mean.data.shape == (3, N_ACTIONS)
    assert np.isfinite(mean.data).all() and np.isfinite(value.data).all()


def test_mean_bias_sets_initial_output():
    bias = tuple(np.linspace(-0.4, 0.4, N_ACTIONS))
    net = PolicyValueNet(NetConfig(mean_bias=bias), seed=0)
    zero_obs = np.zeros((1, 3023))
    mean, _, _ = net.forward(zero_obs)
    # policy weights start at gain 0.01, so the head output is close to the bias
    np.testing.assert_allclose(mean.data[0], bias, atol=0.05)


def test_mean_bias_shape_validated():
    with pytest.raises(ValueError):
        PolicyValueNet(NetConfig(mean_bias=(0.1, 0.2)), seed=0)


def test_net_config_round_trip():
    for cfg in (
        NetConfig(),
        NetConfig(encoder_bypass=True),
        NetConfig(mean_bias=tuple(np.zeros(N_ACTIONS))),
        NetConfig(dtype=np.float64),
    ):
        back = NetConfig.from_dict(cfg.to_dict())
        assert back.encoder_bypass == cfg.encoder_bypass
        assert back.dtype == cfg.dtype
        assert (back.mean_bias is None) == (cfg.mean_bias is None)


def test_state_dict_round_trip():
    a = PolicyValueNet(NetConfig(), seed=0)
    b = PolicyValueNet(NetConfig(), seed=9)
    b.load_state_dict(a.state_dict())
    obs = np.random.default_rng(2).standard_normal((4, 3023))
    ma, _, va = a.forward(obs)
    mb, _, vb = b.forward(obs)
    np.testing.assert_array_equal(ma.data, mb.data)
    np.testing.assert_array_equal(va.data, vb.data)


def test_state_dict_shape_mismatch_rejected():
    a = PolicyValueNet(NetConfig(), seed=0)
    bad = a.state_dict()
    bad["policy_w"] = bad["policy_w"][:, :5]
    with pytest.raises(ValueError):
        a.load_state_dict(bad)


def test_obs_scale_vector_finite_positive():
    s = obs_scale_vector()
    assert s.shape == (3023,)
    assert (s > 0).all() and np.isfinite(s).all()


def test_checkpoint_round_trip(tmp_path):
    agent = Agent(ppo=PpoConfig(lr=5e-4), seed=3)
    rng = np.random.default_rng(0)
    obs = rng.standard_normal(3023)
    a1, raw1, logp1, v1 = agent.act(obs, np.random.default_rng(7))

    path = os.path.join(tmp_path, "ck.npz")
    save_checkpoint(path, agent, {"epoch": 12, "note": "x"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"epoch": 12, "note": "x"}
    assert loaded.ppo.lr == pytest.approx(5e-4)
    a2, raw2, logp2, v2 = loaded.act(obs, np.random.default_rng(7))
    np.testing.assert_array_equal(a1, a2)
    assert logp1 == logp2 and v1 == v2
    # optimizer state restored exactly
    s1, s2 = agent.opt.state_dict(), loaded.opt.state_dict()
    assert s1.keys() == s2.keys()
    for k in s1:
        np.testing.assert_array_equal(np.asarray(s1[k]), np.asarray(s2[k]))


def test_act_deterministic_is_tanh_of_mean():
    agent = Agent(seed=0)
    obs = np.random.default_rng(4).standard_normal(3023)
    out = agent.act_deterministic(obs)
    mean, _, _ = agent.net.forward(obs[None, :])
    np.testing.assert_allclose(out, np.tanh(mean.data[0]), atol=1e-12)
    assert (np.abs(out) <= 1.0).all()


def test_act_samples_reproducibly():
    agent = Agent(seed=0)
    obs = np.random.default_rng(5).standard_normal(3023)
    a1 = agent.act(obs, np.random.default_rng(11))
    a2 = agent.act(obs, np.random.default_rng(11))
    np.testing.assert_array_equal(a1[0], a2[0])
    assert a1[2] == a2[2]
