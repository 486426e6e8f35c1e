"""PPO machinery on top of the policy/value network.

Actions are sampled from a diagonal gaussian in raw (pre-squash) space;
the environment mapping applies tanh and an affine stretch onto joint
limits. Log-probabilities are computed on the raw sample, so the ratio
in the clipped surrogate is exact for the distribution the policy
actually parameterizes.

Episodes are fixed-horizon (90 control frames) or end early on object
loss, so advantage estimation treats every episode end as terminal with
zero bootstrap value.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor, clip_grad_norm, minimum
from .nets import N_ACTIONS, NetConfig, PolicyValueNet

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PpoConfig:
    # Adam's early steps are near full-size per parameter, so the learning
    # rate directly bounds per-update KL; 1e-4 keeps a whole update round
    # inside the trust region instead of tripping the KL stop immediately
    lr: float = 1e-4
    # push/eject cause-effect spans ~10 control frames; a longer credit
    # horizon just imports value noise at desk-scale batch sizes
    gamma: float = 0.9
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 360
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    # stop the update round once the policy drifts this far from the
    # behaviour policy; small batches overfit fast without it
    target_kl: float = 0.03
    # exploration anneal: action noise shrinks linearly from sigma_init
    # to sigma_final across the run. Wide noise is needed early to find
    # the grasp at all, but the reward surface is concave around a good
    # pose, so late noise only drags measured reward and success down
    sigma_init: float = 0.2
    sigma_final: float = 0.1

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "PpoConfig":
        return PpoConfig(**d)


def gaussian_logp(raw: Tensor, mean: Tensor, log_std: Tensor) -> Tensor:
    """(B,) log density of raw actions under N(mean, exp(log_std)^2)."""
    inv_var = (log_std * -2.0).exp()
    quad = (((raw - mean) ** 2) * inv_var).sum(axis=1)
    return quad * -0.5 - log_std.sum() - 0.5 * N_ACTIONS * _LOG_2PI


def gaussian_entropy(log_std: Tensor) -> Tensor:
    """Differential entropy of the diagonal gaussian (state independent)."""
    return log_std.sum() + 0.5 * N_ACTIONS * (1.0 + _LOG_2PI)


def compute_gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float,
                bootstrap: float = 0.0):
    """Per-episode advantages/returns.

    rewards and values are aligned (T,) arrays for one episode. bootstrap
    stands in for V(s_T): zero when the episode truly ended (object lost),
    the critic's last estimate when it merely hit the frame cap. Without
    the bootstrap, late states in full-length episodes look artificially
    bad and the time-limit bias drowns the per-step reward differences.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        next_v = values[t + 1] if t + 1 < T else bootstrap
        delta = rewards[t] + gamma * next_v - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv, adv + values


class Agent:
    def __init__(self, net_config: NetConfig = None, ppo: PpoConfig = None, seed: int = 0):
        self.net = PolicyValueNet(net_config or NetConfig(), seed=seed)
        self.ppo = ppo or PpoConfig()
        self.opt = Adam(self.net.param_list(), lr=self.ppo.lr)

    # -------------------------------------------------------------- acting

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample one action. Returns (squashed, raw, logp, value) floats."""
        mean, log_std, value = self.net.forward(obs[None, :])
        mu = mean.data[0]
        sigma = np.exp(log_std.data)
        raw = mu + sigma * rng.standard_normal(N_ACTIONS)
        z = (raw - mu) / sigma
        logp = -0.5 * float(z @ z) - float(np.sum(log_std.data)) - 0.5 * N_ACTIONS * _LOG_2PI
        return np.tanh(raw), raw, logp, float(value.data[0])

    def act_deterministic(self, obs: np.ndarray) -> np.ndarray:
        mean, _, _ = self.net.forward(obs[None, :])
        return np.tanh(mean.data[0])

    def value(self, obs: np.ndarray) -> float:
        _, _, v = self.net.forward(obs[None, :])
        return float(v.data[0])

    # -------------------------------------------------------------- update

    def ppo_update(self, batch: dict, rng: np.random.Generator) -> dict:
        """One PPO round over the collected batch.

        batch keys: obs (N,3023), raw (N,23), logp (N,), adv (N,), ret (N,).
        """
        obs = np.asarray(batch["obs"])
        raw = np.asarray(batch["raw"], dtype=np.float64)
        logp_old = np.asarray(batch["logp"], dtype=np.float64)
        adv = np.asarray(batch["adv"], dtype=np.float64)
        ret = np.asarray(batch["ret"], dtype=np.float64)
        N = obs.shape[0]
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        cfg = self.ppo
        stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_frac": 0.0, "grad_norm": 0.0}
        n_steps = 0
        stop = False
        for _ in range(cfg.epochs):
            if stop:
                break
            order = rng.permutation(N)
            for start in range(0, N, cfg.minibatch):
                idx = order[start : start + cfg.minibatch]
                mean, log_std, value = self.net.forward(obs[idx])
                logp = gaussian_logp(Tensor(raw[idx].astype(mean.dtype)), mean, log_std)
                approx_kl = float(np.mean(logp_old[idx] - logp.data))
                if cfg.target_kl > 0 and approx_kl > 1.5 * cfg.target_kl:
                    stop = True
                    break
                ratio = (logp - Tensor(logp_old[idx].astype(mean.dtype))).exp()
                a = Tensor(adv[idx].astype(mean.dtype))
                surr = minimum(ratio * a, ratio.clip(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a)
                policy_loss = -surr.mean()
                v_err = value - Tensor(ret[idx].astype(mean.dtype))
                value_loss = (v_err**2).mean()
                entropy = gaussian_entropy(log_std)
                loss = policy_loss + value_loss * cfg.value_coef - entropy * cfg.entropy_coef

                self.opt.zero_grad()
                loss.backward()
                gnorm = clip_grad_norm(self.net.param_list(), cfg.max_grad_norm)
                self.opt.step()

                if not np.isfinite(loss.data):
                    raise FloatingPointError("non-finite PPO loss")
                stats["policy_loss"] += float(policy_loss.data)
                stats["value_loss"] += float(value_loss.data)
                stats["entropy"] += float(entropy.data)
                stats["clip_frac"] += float(np.mean(np.abs(ratio.data - 1.0) > cfg.clip_eps))
                stats["grad_norm"] += gnorm
                n_steps += 1
        for k in stats:
            stats[k] /= max(n_steps, 1)
        return stats


# ------------------------------------------------------------- checkpoints


def save_checkpoint(path, agent: Agent, extra: dict = None):
    """Single-file npz: net params, optimizer state, configs, extra json."""
    payload = {}
    for k, v in agent.net.state_dict().items():
        payload[f"param/{k}"] = v
    for k, v in agent.opt.state_dict().items():
        payload[f"adam/{k}"] = np.asarray(v)
    payload["meta"] = np.frombuffer(
        json.dumps(
            {
                "net_config": agent.net.config.to_dict(),
                "ppo": agent.ppo.to_dict(),
                "extra": extra or {},
            }
        ).encode(),
        dtype=np.uint8,
    )
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple:
    """Returns (agent, extra dict)."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        agent = Agent(
            net_config=NetConfig.from_dict(meta["net_config"]),
            ppo=PpoConfig.from_dict(meta["ppo"]),
        )
        agent.net.load_state_dict(
            {k[len("param/") :]: z[k] for k in z.files if k.startswith("param/")}
        )
        agent.opt.load_state_dict(
            {k[len("adam/") :]: z[k] for k in z.files if k.startswith("adam/")}
        )
    return agent, meta["extra"]
