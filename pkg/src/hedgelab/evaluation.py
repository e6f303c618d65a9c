"""Environment construction, baseline policies, frozen-policy evaluation and
shared-seed comparison of two agents."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .env import HedgeEnv
from .errors import ComparisonError, ConfigError
from .metrics import sharpe_ratio
from .portfolio import PortfolioEnv
from .sac.agent import SacAgent
from .sac.train import EpisodeResult, evaluation_seeds, run_episode

Policy = Callable[[np.ndarray], np.ndarray]


def make_env(cfg: ExperimentConfig):
    if cfg.env_mode == "portfolio":
        return PortfolioEnv(cfg.portfolio_config())
    return HedgeEnv(cfg.env_config())


def env_factory(cfg: ExperimentConfig) -> Callable:
    return lambda: make_env(cfg)


def agent_policy(agent: SacAgent, pad_to: int | None = None) -> Policy:
    """Deterministic policy; ``pad_to`` appends zero action components."""

    def policy(obs):
        a = agent.act(obs, deterministic=True)
        if pad_to is not None and len(a) < pad_to:
            a = np.concatenate([a, np.zeros(pad_to - len(a))])
        return a

    return policy


def random_policy(env, seed: int = 0) -> Policy:
    rng = np.random.default_rng([seed, 6])
    return lambda obs: rng.uniform(env.action_low, env.action_high)


def heuristic_policy(env) -> Policy:
    return lambda obs: env.heuristic_action()


def never_hedge_policy(env) -> Policy:
    return lambda obs: np.zeros(len(env.action_low))


def evaluate_policy(env, policy: Policy, seeds) -> list[EpisodeResult]:
    return [run_episode(env, policy, s) for s in seeds]


def evaluate_agent(agent: SacAgent, cfg: ExperimentConfig, n_episodes: int,
                   seed: int) -> list[EpisodeResult]:
    env = make_env(cfg)
    check_dims(agent, env)
    return evaluate_policy(env, agent_policy(agent), evaluation_seeds(seed, n_episodes))


def check_dims(agent: SacAgent, env) -> None:
    if agent.obs_dim != env.obs_dim or agent.act_dim != len(env.action_low):
        raise ConfigError(
            f"checkpoint expects obs/action dims ({agent.obs_dim}, {agent.act_dim}); "
            f"environment has ({env.obs_dim}, {len(env.action_low)})")


@dataclass
class ComparisonReport:
    seeds: list[int]
    rows: list[dict] = field(default_factory=list)

    @property
    def wins_a(self) -> int:
        return sum(1 for r in self.rows if _gt(r["sharpe_a"], r["sharpe_b"]))

    @property
    def wins_b(self) -> int:
        return sum(1 for r in self.rows if _gt(r["sharpe_b"], r["sharpe_a"]))

    def summary(self) -> dict:
        n = len(self.rows)
        return {
            "seeds": n,
            "wins_a": self.wins_a,
            "wins_b": self.wins_b,
            "mean_reward_a": float(np.mean([r["reward_a"] for r in self.rows])) if n else None,
            "mean_reward_b": float(np.mean([r["reward_b"] for r in self.rows])) if n else None,
        }

    def write_csv(self, path: str | Path) -> None:
        cols = ["seed", "sharpe_a", "sharpe_b", "reward_a", "reward_b", "net_pnl_a", "net_pnl_b"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _fmt(r[k]) for k in cols})


def _gt(a: float, b: float) -> bool:
    return math.isfinite(a) and (not math.isfinite(b) or a > b)


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else x


def _sharpe(result: EpisodeResult) -> float:
    return sharpe_ratio(result.pnl_series) if len(result.pnl_series) >= 3 else math.nan


_SHARED_PREFIXES = ("market.", "flow.", "env.")


def comparison_config(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig) -> ExperimentConfig:
    """The environment both agents run in.

    Portfolio agents only compare with portfolio agents. Among single-asset
    modes, plain and skew agents share the skew environment (the plain agent
    never skews); price-of-risk agents only compare with each other.
    """
    modes = {cfg_a.env_mode, cfg_b.env_mode}
    if len(modes) > 1 and modes != {"single", "skew"}:
        raise ComparisonError(f"cannot compare modes {sorted(modes)} on shared data")
    fa, fb = cfg_a.to_flat(), cfg_b.to_flat()
    prefixes = ("market.", "market2.", "flow.", "flow2.", "portfolio.") \
        if "portfolio" in modes else _SHARED_PREFIXES
    ignore = {"flow.beta_skew"} if len(modes) > 1 else set()
    diff = [k for k in fa if k.startswith(prefixes) and k not in ignore and fa[k] != fb[k]]
    if diff:
        raise ComparisonError(f"environment settings differ: {', '.join(sorted(diff))}")
    return cfg_a if cfg_a.env_mode == "skew" or len(modes) == 1 else cfg_b


def _episode_data(env) -> list[np.ndarray]:
    if isinstance(env, PortfolioEnv):
        paths, flows = env.markets, env.flows
    else:
        paths, flows = [env.market], [env.flow]
    out = []
    for p, f in zip(paths, flows):
        out += list(p.arrays().values()) + [f.bid_size, f.ask_size, f.rate, f.boost_u]
    return [a.copy() for a in out]


def compare_agents(agent_a: SacAgent, cfg_a: ExperimentConfig, agent_b: SacAgent,
                   cfg_b: ExperimentConfig, n_seeds: int, seed: int = 0) -> ComparisonReport:
    cfg = comparison_config(cfg_a, cfg_b)
    env = make_env(cfg)
    n_act = len(env.action_low)
    for agent in (agent_a, agent_b):
        if agent.obs_dim != env.obs_dim or agent.act_dim > n_act:
            raise ComparisonError("agent dimensions do not fit the shared environment")
    pol_a, pol_b = agent_policy(agent_a, n_act), agent_policy(agent_b, n_act)
    seeds = evaluation_seeds(seed, n_seeds)
    report = ComparisonReport(seeds)
    for s in seeds:
        ra = run_episode(env, pol_a, s)
        data_a = _episode_data(env)
        rb = run_episode(env, pol_b, s)
        if not all(np.array_equal(x, y) for x, y in zip(data_a, _episode_data(env))):
            raise ComparisonError(f"seed {s}: market data differs between agents")
        report.rows.append({
            "seed": s, "sharpe_a": _sharpe(ra), "sharpe_b": _sharpe(rb),
            "reward_a": ra.total_reward, "reward_b": rb.total_reward,
            "net_pnl_a": ra.net_pnl, "net_pnl_b": rb.net_pnl,
        })
    return report
