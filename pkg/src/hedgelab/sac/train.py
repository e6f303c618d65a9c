"""Off-policy training loop and frozen-policy evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import TrainingError
from .agent import SacAgent, SacHyper
from .buffer import ReplayBuffer

log = logging.getLogger(__name__)

METRIC_KEYS = ("epoch", "mean_reward", "q1_loss", "q2_loss", "policy_loss", "alpha",
               "mean_abs_position", "episodes")


@dataclass
class TrainResult:
    agent: SacAgent
    metrics: list[dict] = field(default_factory=list)
    buffer: ReplayBuffer | None = None


def _mean(xs) -> float | None:
    return float(np.mean(xs)) if len(xs) else None


def episode_seeds(seed: int):
    """Endless deterministic stream of per-episode market seeds."""
    rng = np.random.default_rng([seed, 2])
    while True:
        yield int(rng.integers(0, 2**31 - 1))


def train(env_factory: Callable, hyper: SacHyper | None = None, seed: int = 0,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Train a fresh agent.

    Args:
        env_factory: zero-argument callable returning an environment with
            ``obs_dim``, ``action_low``/``action_high``, ``reset(seed)`` and
            ``step(action)``.
        hyper: SAC hyperparameters; ``epochs * steps_per_epoch`` environment
            steps are taken in total.
        seed: drives network init, exploration noise, batches and markets.
        on_epoch: called with each epoch's metrics record as it is produced.

    Raises:
        TrainingError: a loss went non-finite; ``err.metrics`` holds the
            completed epochs.
    """
    hyper = hyper or SacHyper()
    env = env_factory()
    agent = SacAgent(env.obs_dim, env.action_low, env.action_high, hyper, seed)
    buffer = ReplayBuffer(env.obs_dim, agent.act_dim, hyper.replay_size)
    explore_rng = np.random.default_rng([seed, 3])
    batch_rng = np.random.default_rng([seed, 4])
    seeds = episode_seeds(seed)

    result = TrainResult(agent, [], buffer)
    obs = env.reset(next(seeds))
    ep_return = 0.0
    total = 0
    for epoch in range(hyper.epochs):
        returns, abs_pos = [], []
        losses = {"q1_loss": [], "q2_loss": [], "policy_loss": []}
        for _ in range(hyper.steps_per_epoch):
            if total < hyper.warmup_steps:
                unit = explore_rng.uniform(-1.0, 1.0, agent.act_dim)
            else:
                unit = agent.act_unit(obs)
            next_obs, reward, done, info = env.step(agent.box.to_env(unit))
            terminal = bool(info.get("terminated", done))
            buffer.add(obs, unit, reward * hyper.reward_scale, next_obs, terminal)
            ep_return += reward
            abs_pos.append(abs(info.get("net_position", 0.0)))
            total += 1
            obs = next_obs
            if done:
                returns.append(ep_return)
                ep_return = 0.0
                obs = env.reset(next(seeds))

            if total >= hyper.warmup_steps and len(buffer) >= hyper.batch_size:
                for _ in range(hyper.updates_per_step):
                    try:
                        stats = agent.update(buffer.sample(hyper.batch_size, batch_rng))
                    except TrainingError as err:
                        raise TrainingError(f"epoch {epoch}: {err}", result.metrics) from err
                    for k, v in stats.items():
                        losses[k].append(v)

        record = {
            "epoch": epoch,
            "mean_reward": _mean(returns),
            "q1_loss": _mean(losses["q1_loss"]),
            "q2_loss": _mean(losses["q2_loss"]),
            "policy_loss": _mean(losses["policy_loss"]),
            "alpha": agent.alpha,
            "mean_abs_position": _mean(abs_pos),
            "episodes": len(returns),
        }
        for k in ("q1_loss", "q2_loss", "policy_loss"):
            if record[k] is not None and not math.isfinite(record[k]):
                raise TrainingError(f"epoch {epoch}: non-finite {k}", result.metrics)
        result.metrics.append(record)
        log.info("epoch %d reward %s |pos| %.2f", epoch, record["mean_reward"],
                 record["mean_abs_position"] or 0.0)
        if on_epoch is not None:
            on_epoch(record)
    return result


@dataclass
class EpisodeResult:
    seed: int
    total_reward: float
    net_pnl: float
    pnl_series: list[float]
    mean_abs_position: float
    steps: int
    records: list[dict]


def run_episode(env, policy: Callable[[np.ndarray], np.ndarray], seed: int) -> EpisodeResult:
    """Roll one episode. ``policy`` maps an observation to an env action and may
    inspect ``env`` (the heuristic hedger does)."""
    obs = env.reset(seed)
    done = False
    total, pnl, abs_pos = 0.0, [0.0], []
    while not done:
        obs, reward, done, info = env.step(policy(obs))
        total += reward
        pnl.append(info["net_pnl"])
        abs_pos.append(abs(info["net_position"]))
    return EpisodeResult(seed, total, pnl[-1], pnl, float(np.mean(abs_pos)), len(abs_pos),
                         list(getattr(env, "records", [])))


def evaluation_seeds(seed: int, n: int) -> list[int]:
    rng = np.random.default_rng([seed, 5])
    return [int(s) for s in rng.integers(0, 2**31 - 1, size=n)]
