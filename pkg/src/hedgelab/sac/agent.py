"""Soft actor-critic agent: policy, twin critics with polyak targets, and
the per-batch update rules."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError, TrainingError
from .mlp import Adam, Mlp, polyak_update
from .policy import ActionBox, SquashedSample, squash

# critic(obs, unit_action) -> (q of shape (batch,), dq/da of shape (batch, act_dim))
Critic = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class SacHyper:
    gamma: float = 0.99
    tau: float = 0.005
    alpha: float = 0.2
    auto_alpha: bool = False
    target_entropy: float | None = None
    lr_policy: float = 3e-4
    lr_q: float = 3e-4
    lr_alpha: float = 3e-4
    batch_size: int = 256
    replay_size: int = 100_000
    warmup_steps: int = 1000
    updates_per_step: int = 1
    epochs: int = 50
    steps_per_epoch: int = 1000
    hidden: tuple[int, ...] = field(default=(256, 256))
    reward_scale: float = 1.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must lie in (0, 1]")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.batch_size < 1 or self.batch_size > self.replay_size:
            raise ConfigError("need 1 <= batch_size <= replay_size")
        if self.warmup_steps < 0 or self.updates_per_step < 0:
            raise ConfigError("warmup_steps and updates_per_step must be non-negative")
        if self.epochs < 0 or self.steps_per_epoch < 1:
            raise ConfigError("epochs must be >= 0 and steps_per_epoch >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer sizes must be positive")
        if not self.reward_scale > 0:
            raise ConfigError("reward_scale must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class SacAgent:
    def __init__(self, obs_dim: int, action_low, action_high, hyper: SacHyper | None = None,
                 seed: int = 0):
        self.hyper = hyper or SacHyper()
        self.box = ActionBox(action_low, action_high)
        self.obs_dim = int(obs_dim)
        self.act_dim = len(self.box.low)
        self.seed = seed
        init_rng = np.random.default_rng([seed, 0])
        self.rng = np.random.default_rng([seed, 1])
        h = self.hyper.hidden
        self.policy = Mlp((self.obs_dim, *h, 2 * self.act_dim), init_rng, out_scale=0.01)
        self.q1 = Mlp((self.obs_dim + self.act_dim, *h, 1), init_rng)
        self.q2 = Mlp((self.obs_dim + self.act_dim, *h, 1), init_rng)
        self.q1_targ = self.q1.copy()
        self.q2_targ = self.q2.copy()
        self.log_alpha = np.array([math.log(self.hyper.alpha)]) if self.hyper.alpha > 0 \
            else np.array([-math.inf])
        self.target_entropy = (self.hyper.target_entropy if self.hyper.target_entropy is not None
                               else -float(self.act_dim))
        self.pi_opt = Adam(self.policy.params, self.hyper.lr_policy)
        self.q1_opt = Adam(self.q1.params, self.hyper.lr_q)
        self.q2_opt = Adam(self.q2.params, self.hyper.lr_q)
        self.alpha_opt = Adam([self.log_alpha], self.hyper.lr_alpha)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- acting -----------------------------------------------------------

    def policy_sample(self, obs: np.ndarray, deterministic: bool = False,
                      rng: np.random.Generator | None = None) -> tuple[SquashedSample, list]:
        raw, cache = self.policy.forward(obs)
        xi = None if deterministic else (rng or self.rng).standard_normal(
            (raw.shape[0], self.act_dim))
        return squash(raw, xi), cache

    def act(self, obs, deterministic: bool = False) -> np.ndarray:
        """Single environment action inside the box."""
        sample, _ = self.policy_sample(np.atleast_2d(obs), deterministic)
        return self.box.to_env(sample.action[0])

    def act_unit(self, obs, deterministic: bool = False) -> np.ndarray:
        sample, _ = self.policy_sample(np.atleast_2d(obs), deterministic)
        return sample.action[0]

    # -- critics ----------------------------------------------------------

    @staticmethod
    def _q(net: Mlp, obs: np.ndarray, act: np.ndarray) -> np.ndarray:
        return net(np.concatenate([obs, act], axis=1))[:, 0]

    def min_q_critic(self, obs: np.ndarray, act: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise min of the twin critics and its gradient w.r.t. action."""
        x = np.concatenate([obs, act], axis=1)
        q1, c1 = self.q1.forward(x)
        q2, c2 = self.q2.forward(x)
        pick1 = (q1[:, 0] <= q2[:, 0])[:, None].astype(float)
        _, dx1 = self.q1.backward(c1, pick1, params=False)
        _, dx2 = self.q2.backward(c2, 1.0 - pick1, params=False)
        q = np.minimum(q1[:, 0], q2[:, 0])
        return q, (dx1 + dx2)[:, self.obs_dim:]

    def q_target(self, batch: dict, rng: np.random.Generator | None = None) -> np.ndarray:
        """Soft Bellman backup with a fresh policy action at the next state."""
        sample, _ = self.policy_sample(batch["next_obs"], rng=rng)
        q1 = self._q(self.q1_targ, batch["next_obs"], sample.action)
        q2 = self._q(self.q2_targ, batch["next_obs"], sample.action)
        soft = np.minimum(q1, q2) - self.alpha * sample.log_prob
        return q_backup(batch["rew"], batch["done"], soft, self.hyper.gamma)

    # -- updates ----------------------------------------------------------

    def update_critics(self, batch: dict, y: np.ndarray) -> tuple[float, float]:
        losses = []
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        for net, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            out, cache = net.forward(x)
            loss, dq = q_loss(out[:, 0], y)
            grads, _ = net.backward(cache, dq[:, None])
            opt.step(grads)
            losses.append(loss)
        return losses[0], losses[1]

    def update_policy(self, obs: np.ndarray, critic: Critic | None = None,
                      rng: np.random.Generator | None = None) -> tuple[float, np.ndarray]:
        """One ascent step on ``mean(min Q(s, a~) - alpha * log pi(a~|s))``.

        Returns the loss (negated objective) and the batch log-probabilities.
        """
        critic = critic or self.min_q_critic
        sample, cache = self.policy_sample(obs, rng=rng)
        q, dq_da = critic(obs, sample.action)
        n = len(q)
        alpha = self.alpha
        loss = float(np.mean(alpha * sample.log_prob - q))
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite policy loss {loss}")
        d_raw = sample.backward(-dq_da / n, np.full(n, alpha / n))
        grads, _ = self.policy.backward(cache, d_raw)
        self.pi_opt.step(grads)
        return loss, sample.log_prob

    def update_alpha(self, log_prob: np.ndarray) -> None:
        grad = -float(np.mean(log_prob + self.target_entropy))
        self.alpha_opt.step([np.array([grad])])

    def update_targets(self) -> None:
        polyak_update(self.q1_targ, self.q1, self.hyper.tau)
        polyak_update(self.q2_targ, self.q2, self.hyper.tau)

    def update(self, batch: dict) -> dict[str, float]:
        y = self.q_target(batch)
        l1, l2 = self.update_critics(batch, y)
        pl, log_prob = self.update_policy(batch["obs"])
        if self.hyper.auto_alpha:
            self.update_alpha(log_prob)
        self.update_targets()
        return {"q1_loss": l1, "q2_loss": l2, "policy_loss": pl}

    # -- persistence ------------------------------------------------------

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, net in (("policy", self.policy), ("q1", self.q1), ("q2", self.q2),
                          ("q1_targ", self.q1_targ), ("q2_targ", self.q2_targ)):
            for i, p in enumerate(net.params):
                kind = "W" if i % 2 == 0 else "b"
                out.append((f"{name}.{kind}{i // 2}", p))
        out.append(("log_alpha", self.log_alpha))
        return out


def q_backup(rew, done, soft_next_value, gamma: float) -> np.ndarray:
    """``r + gamma * (1 - d) * soft_next_value``."""
    rew, done = np.asarray(rew, dtype=float), np.asarray(done, dtype=float)
    return rew + gamma * (1.0 - done) * np.asarray(soft_next_value, dtype=float)


def q_loss(q: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared Bellman error against detached targets, and dL/dq."""
    resid = np.asarray(q, dtype=float) - np.asarray(y, dtype=float)
    # Overflow is reported as divergence below, not as a numpy warning.
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.mean(resid**2))
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite critic loss {loss}")
    return loss, 2.0 * resid / resid.size


def sample_action(agent: SacAgent, obs, deterministic: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Bounded actions and their log-density in the environment's units."""
    sample, _ = agent.policy_sample(np.atleast_2d(obs), deterministic, rng)
    action = agent.box.center + agent.box.scale * sample.action
    return action, sample.log_prob - agent.box.log_det
