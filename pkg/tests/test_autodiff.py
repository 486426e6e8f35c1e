"""Gradient correctness: op-level and full-loss finite differences, the
gaussian log-density and entropy closed forms, GAE against a brute-force
discounted sum, and the Adam reference update."""
import time

import numpy as np
import pytest

from griplab import autodiff as ad
from griplab.agent import (
    Agent,
    PpoConfig,
    compute_gae,
    gaussian_entropy,
    gaussian_logp,
)
from griplab.autodiff import Adam, Tensor, clip_grad_norm, minimum
from griplab.nets import N_ACTIONS, NetConfig, PolicyValueNet


# ------------------------------------------------------------- op-level FD

def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f(x)
        flat[i] = old - eps
        lo = f(x)
        flat[i] = old
        gf[i] = (hi - lo) / (2 * eps)
    return g


OPS = {
    "add": lambda t: (t + 2.0).sum(),
    "mul": lambda t: (t * t).sum(),
    "div": lambda t: (t / 3.0).sum(),
    "rdiv": lambda t: (2.0 / (t + 3.0)).sum(),
    "pow": lambda t: (t**3).sum(),
    "neg_sub": lambda t: (-(t - 1.0)).sum(),
    "tanh": lambda t: t.tanh().sum(),
    "exp": lambda t: t.exp().sum(),
    "log": lambda t: (t + 3.0).log().sum(),
    "mean": lambda t: (t * 2.0).mean(),
    "clip": lambda t: t.clip(-0.5, 0.5).sum(),
    "getitem": lambda t: t[1:3].sum(),
    "matmul": lambda t: (t @ t).sum(),
    "axis_sum": lambda t: ((t.sum(axis=0)) * 2.0).sum(),
    "keepdims_mean": lambda t: (t - t.mean(axis=1, keepdims=True)).sum(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_fd(name):
    rng = np.random.default_rng(hash(name) % 2**32)
    x = rng.uniform(0.2, 1.5, size=(4, 4))
    fn = OPS[name]

    t = ad.parameter(x.copy(), dtype=np.float64)
    out = fn(t)
    out.backward()

    def scalar(xv):
        return float(fn(Tensor(xv.astype(np.float64))).data)

    num = numeric_grad(scalar, x.copy())
    np.testing.assert_allclose(t.grad, num, rtol=1e-5, atol=1e-7)


def test_minimum_gradient_routing():
    a = ad.parameter(np.array([1.0, 5.0]), dtype=np.float64)
    b = ad.parameter(np.array([2.0, 3.0]), dtype=np.float64)
    minimum(a, b).sum().backward()
    np.testing.assert_array_equal(a.grad, [1.0, 0.0])
    np.testing.assert_array_equal(b.grad, [0.0, 1.0])


def test_concat_gradient_split():
    a = ad.parameter(np.ones((2, 2)), dtype=np.float64)
    b = ad.parameter(np.ones((2, 3)), dtype=np.float64)
    out = ad.concat([a, b], axis=1)
    (out * np.arange(10).reshape(2, 5)).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0, 1], [5, 6]])
    np.testing.assert_array_equal(b.grad, [[2, 3, 4], [7, 8, 9]])


def test_broadcast_unbroadcast_round_trip():
    a = ad.parameter(np.ones((3, 1)), dtype=np.float64)
    b = ad.parameter(np.ones((1, 4)), dtype=np.float64)
    (a * b).sum().backward()
    np.testing.assert_array_equal(a.grad, np.full((3, 1), 4.0))
    np.testing.assert_array_equal(b.grad, np.full((1, 4), 3.0))


# ------------------------------------------------------ closed-form checks

def test_gaussian_logp_matches_closed_form():
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((8, N_ACTIONS))
    mean = rng.standard_normal((8, N_ACTIONS))
    log_std = rng.uniform(-1.5, 0.2, N_ACTIONS)
    got = gaussian_logp(Tensor(raw), Tensor(mean), Tensor(log_std)).data
    var = np.exp(2 * log_std)
    want = (
        -0.5 * np.sum((raw - mean) ** 2 / var, axis=1)
        - np.sum(log_std)
        - 0.5 * N_ACTIONS * np.log(2 * np.pi)
    )
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_gaussian_entropy_matches_monte_carlo():
    rng = np.random.default_rng(1)
    log_std = rng.uniform(-1.0, 0.0, N_ACTIONS)
    want = float(gaussian_entropy(Tensor(log_std)).data)
    # MC estimate of -E[log p]
    samples = rng.standard_normal((200_000, N_ACTIONS)) * np.exp(log_std)
    lp = gaussian_logp(Tensor(samples), Tensor(np.zeros(N_ACTIONS)), Tensor(log_std)).data
    assert abs(-lp.mean() - want) < 0.01


# ----------------------------------------------------------------- GAE

def brute_force_gae(rewards, values, gamma, lam, bootstrap=0.0):
    T = len(rewards)
    vals = np.append(values, bootstrap)
    deltas = rewards + gamma * vals[1:] - vals[:-1]
    adv = np.zeros(T)
    for t in range(T):
        acc = 0.0
        for k in range(T - t):
            acc += (gamma * lam) ** k * deltas[t + k]
        adv[t] = acc
    return adv, adv + values


@pytest.mark.parametrize("bootstrap", [0.0, 0.7])
def test_gae_matches_quadratic_brute_force(bootstrap):
    rng = np.random.default_rng(5)
    for _ in range(20):
        T = int(rng.integers(1, 40))
        rewards = rng.standard_normal(T)
        values = rng.standard_normal(T)
        adv, ret = compute_gae(rewards, values, 0.97, 0.9, bootstrap)
        adv2, ret2 = brute_force_gae(rewards, values, 0.97, 0.9, bootstrap)
        np.testing.assert_allclose(adv, adv2, atol=1e-10)
        np.testing.assert_allclose(ret, ret2, atol=1e-10)


def test_gae_single_step():
    adv, ret = compute_gae(np.array([2.0]), np.array([0.5]), 0.9, 0.95, bootstrap=1.0)
    assert adv[0] == pytest.approx(2.0 + 0.9 * 1.0 - 0.5)


# ----------------------------------------------------------------- Adam

def test_adam_matches_reference_update():
    x0 = np.array([1.0, -2.0, 3.0])
    p = ad.parameter(x0.copy(), dtype=np.float64)
    opt = Adam([p], lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8)

    m = np.zeros(3)
    v = np.zeros(3)
    ref = x0.copy()
    for t in range(1, 6):
        (p * p).sum().backward()
        g = 2 * ref  # analytic gradient of sum(x^2)
        np.testing.assert_allclose(p.grad, g, rtol=1e-12)
        opt.step()
        opt.zero_grad()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mh = m / (1 - 0.9**t)
        vh = v / (1 - 0.999**t)
        ref = ref - 0.01 * mh / (np.sqrt(vh) + 1e-8)
        np.testing.assert_allclose(p.data, ref, rtol=1e-12)


def test_clip_grad_norm_scales_in_place():
    p = ad.parameter(np.zeros(4), dtype=np.float64)
    p.grad = np.array([3.0, 4.0, 0.0, 0.0])
    norm = clip_grad_norm([p], 1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(p.grad, [0.6, 0.8, 0.0, 0.0])
    # below the cap: untouched
    p.grad = np.array([0.3, 0.4, 0.0, 0.0])
    clip_grad_norm([p], 1.0)
    np.testing.assert_allclose(p.grad, [0.3, 0.4, 0.0, 0.0])


# ------------------------------------------------- full PPO loss gradients

def ppo_loss_for_fd(net, obs, raw, logp_old, adv, ret, cfg):
    mean, log_std, value = net.forward(obs)
    logp = gaussian_logp(Tensor(raw), mean, log_std)
    ratio = (logp - Tensor(logp_old)).exp()
    a = Tensor(adv)
    surr = minimum(ratio * a, ratio.clip(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a)
    policy_loss = -surr.mean()
    value_loss = ((value - Tensor(ret)) ** 2).mean()
    entropy = gaussian_entropy(log_std)
    return policy_loss + value_loss * cfg.value_coef - entropy * cfg.entropy_coef


def test_ppo_loss_gradients_match_fd_on_small_nets():
    # acceptance: 20 randomized small networks, rel err < 1e-3, under 1 min
    t0 = time.time()
    cfg = PpoConfig()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(20):
        net = PolicyValueNet(NetConfig(dtype=np.float64), seed=trial)
        # shrink every parameter tensor to keep FD affordable
        for k in list(net.params):
            net.params[k] = ad.parameter(
                rng.standard_normal(net.params[k].data.shape) * 0.05, dtype=np.float64
            )
        obs = rng.standard_normal((4, 3023)) * 0.5
        raw = rng.standard_normal((4, N_ACTIONS)) * 0.5
        mean0, ls0, v0 = net.forward(obs)
        logp_old = gaussian_logp(Tensor(raw), mean0, ls0).data + rng.normal(0, 0.1, 4)
        adv = rng.standard_normal(4)
        ret = rng.standard_normal(4)

        loss = ppo_loss_for_fd(net, obs, raw, logp_old, adv, ret, cfg)
        for p in net.param_list():
            p.zero_grad()
        loss.backward()

        name, p = "log_std", net.params["log_std"]
        for name in ("log_std", "policy_w", "value_w", "trunk1_b"):
            p = net.params[name]
            flat = p.data.ravel()
            idxs = rng.choice(flat.size, size=min(6, flat.size), replace=False)
            for i in idxs:
                eps = 1e-5
                old = flat[i]
                flat[i] = old + eps
                hi = float(ppo_loss_for_fd(net, obs, raw, logp_old, adv, ret, cfg).data)
                flat[i] = old - eps
                lo = float(ppo_loss_for_fd(net, obs, raw, logp_old, adv, ret, cfg).data)
                flat[i] = old
                fd = (hi - lo) / (2 * eps)
                an = p.grad.ravel()[i]
                denom = max(abs(fd), abs(an), 1e-8)
                rel = abs(fd - an) / denom
                worst = max(worst, rel)
                assert rel < 1e-3, (trial, name, i, fd, an)
    dt = time.time() - t0
    print(f"ppo fd check: worst rel err {worst:.2e} in {dt:.1f}s")
    assert dt < 60.0


def test_backward_accumulates_and_zero_grad_resets():
    p = ad.parameter(np.array([2.0]), dtype=np.float64)
    (p * 3.0).sum().backward()
    (p * 3.0).sum().backward()
    np.testing.assert_allclose(p.grad, [6.0])
    p.zero_grad()
    assert p.grad is None


def test_detach_blocks_gradient():
    p = ad.parameter(np.array([1.5]), dtype=np.float64)
    out = (p.detach() * p).sum()
    out.backward()
    np.testing.assert_allclose(p.grad, [1.5])
