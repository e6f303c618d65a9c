"""Two-asset portfolio hedging environment.

Clients trade a blend of two assets at blended quotes and blended sizes; the
agent hedges in each asset separately at that asset's hedge quotes. Three
positions accrue (blended client, hedge in asset 1, hedge in asset 2) and
each books its own spread and revaluation PNL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError, StateError
from .flow import FlowConfig, FlowPath, generate_flow
from .market import MarketConfig, MarketPath, generate_market

PORTFOLIO_COLUMNS = (
    "step", "mid", "client_bid", "client_ask", "hedge_bid", "hedge_ask",
    "client_bid_size", "client_ask_size", "action_hedge", "action_skew",
    "client_pos", "hedge_pos", "net_pos", "client_pnl", "hedge_pnl",
    "market_pnl", "net_pnl", "penalty", "reward", "done",
    "mid1", "mid2", "blended_mid", "hedge1_pos", "hedge2_pos",
    "hedge1_pnl", "hedge2_pnl", "portfolio_value", "overhedge",
)


@dataclass(frozen=True)
class PortfolioConfig:
    w: float = 0.5
    rho: float = 0.0
    phi: float = 1.0
    gamma_penalty: float = 0.1
    max_pos_limit: float = 50.0
    max_hedge_size: float = 10.0
    convex_parametrization: bool = False
    termination_multiple: float = 2.0
    market1: MarketConfig = field(default_factory=MarketConfig)
    market2: MarketConfig = field(default_factory=MarketConfig)
    flow1: FlowConfig = field(default_factory=FlowConfig)
    flow2: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self):
        if not 0 <= self.w <= 1:
            raise ConfigError(f"blend weight must lie in [0, 1], got {self.w}")
        if not abs(self.rho) <= 1:
            raise ConfigError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.phi < 0:
            raise ConfigError("phi must be non-negative")
        if not self.max_pos_limit > 0 or not self.max_hedge_size > 0:
            raise ConfigError("position and hedge limits must be positive")
        if not self.termination_multiple > 1:
            raise ConfigError("termination_multiple must exceed 1")
        if self.market1.n_steps != self.market2.n_steps:
            raise ConfigError("both assets must share n_steps")

    @property
    def s0(self) -> float:
        return self.w * self.market1.s0 + (1 - self.w) * self.market2.s0

    @property
    def value_scale(self) -> float:
        return self.s0 * self.max_pos_limit


@dataclass
class PortfolioState:
    t: int = 0
    client_position: float = 0.0
    hedge1_position: float = 0.0
    hedge2_position: float = 0.0
    client_pnl: float = 0.0
    hedge1_pnl: float = 0.0
    hedge2_pnl: float = 0.0
    # Spread-only parts of the cumulative PNL above.
    client_spread_pnl: float = 0.0
    hedge_spread_pnl: float = 0.0
    done: bool = False

    @property
    def net_pnl(self) -> float:
        return self.client_pnl + self.hedge1_pnl + self.hedge2_pnl


def _check_weight(w: float):
    if not 0 <= w <= 1:
        raise ParameterError(f"blend weight must lie in [0, 1], got {w}")


def blend_prices(s1, s2, w: float):
    _check_weight(w)
    return w * np.asarray(s1) + (1 - w) * np.asarray(s2)


def blend_sizes(f1, f2, w: float):
    _check_weight(w)
    return w * np.asarray(f1) + (1 - w) * np.asarray(f2)


def portfolio_value(state: PortfolioState, mid1: float, mid2: float, blended_mid: float) -> float:
    return (blended_mid * state.client_position + mid1 * state.hedge1_position
            + mid2 * state.hedge2_position)


def overhedge(hedge_value: float, client_pos_value: float) -> float:
    """Excess of a hedge that overshoots or leverages the client position."""
    same_sign = hedge_value * client_pos_value > 0
    overshoot = hedge_value != 0 and abs(hedge_value) > abs(client_pos_value)
    if same_sign or overshoot:
        return abs(hedge_value + client_pos_value)
    return 0.0


def portfolio_penalty(value: float, overhedge_total: float, cfg: PortfolioConfig) -> float:
    exponent = (abs(value) + cfg.phi * abs(overhedge_total)) / cfg.value_scale
    return cfg.gamma_penalty * cfg.s0 * np.expm1(exponent) * cfg.max_pos_limit


def convex_action_map(w_action: float, amount: float, max_hedge_size: float | None = None):
    """Split one hedge amount across the assets by weight.

    Returns ``(hedge1, hedge2, clipped)``.
    """
    w = float(np.clip(w_action, 0.0, 1.0))
    a = float(amount) if max_hedge_size is None else float(
        np.clip(amount, -max_hedge_size, max_hedge_size))
    clipped = w != w_action or a != amount
    return w * a, (1 - w) * a, clipped


def reward_portfolio(client_pnl: float, hedge1_pnl: float, hedge2_pnl: float, penalty: float) -> float:
    return client_pnl + hedge1_pnl + hedge2_pnl - penalty


def _half_spread(path: MarketPath, t: int, size: float) -> float:
    return path.hedge_ask[t] - path.mid[t] if size > 0 else path.mid[t] - path.hedge_bid[t]


class PortfolioEnv:
    """Observation: (hedge-1 value, hedge-2 value, portfolio value) over S0*MaxPosLimit."""

    obs_dim = 3
    action_dim = 2

    def __init__(self, cfg: PortfolioConfig | None = None,
                 markets: tuple[MarketPath, MarketPath] | None = None,
                 flows: tuple[FlowPath, FlowPath] | None = None):
        self.cfg = cfg or PortfolioConfig()
        if (markets is None) != (flows is None):
            raise ConfigError("inject markets and flows together")
        self._fixed = (markets, flows) if markets is not None else None
        m = self.cfg.max_hedge_size
        if self.cfg.convex_parametrization:
            self.action_low, self.action_high = np.array([0.0, -m]), np.array([1.0, m])
        else:
            self.action_low, self.action_high = np.array([-m, -m]), np.array([m, m])
        self.state = PortfolioState(done=True)
        self.records: list[dict] = []

    @property
    def episode_length(self) -> int:
        return len(self.markets[0]) - 1

    def reset(self, seed: int | None = None) -> np.ndarray:
        if self._fixed is not None:
            self.markets, self.flows = self._fixed
        else:
            cfg = self.cfg
            rng = np.random.default_rng(seed)
            p1, p2 = generate_market(cfg.market1, rng, rho=cfg.rho, n_assets=2, cfg2=cfg.market2)
            self.markets = (p1, p2)
            self.flows = (generate_flow(cfg.flow1, cfg.market1, p1, rng),
                          generate_flow(cfg.flow2, cfg.market2, p2, rng))
        self.state = PortfolioState()
        self.records = []
        return self.observation()

    def blended(self, name: str, t: int) -> float:
        p1, p2 = self.markets
        return float(blend_prices(getattr(p1, name)[t], getattr(p2, name)[t], self.cfg.w))

    def values(self, t: int) -> tuple[float, float, float, float]:
        """(client value, hedge-1 value, hedge-2 value, portfolio value) at t."""
        s, (p1, p2) = self.state, self.markets
        client = self.blended("mid", t) * s.client_position
        h1 = p1.mid[t] * s.hedge1_position
        h2 = p2.mid[t] * s.hedge2_position
        return client, h1, h2, client + h1 + h2

    def observation(self) -> np.ndarray:
        _, h1, h2, value = self.values(self.state.t)
        return np.array([h1, h2, value]) / self.cfg.value_scale

    def hedges_from_action(self, action) -> tuple[float, float, bool]:
        a = np.asarray(action, dtype=float)
        m = self.cfg.max_hedge_size
        if self.cfg.convex_parametrization:
            return convex_action_map(a[0], a[1], m)
        h = np.clip(a[:2], -m, m)
        return float(h[0]), float(h[1]), bool(np.any(h != a[:2]))

    def heuristic_action(self) -> np.ndarray:
        """Offset the blended client position pro rata to the blend weights,
        up to the hedge limit; assumes the weights are known."""
        s, w, m = self.state, self.cfg.w, self.cfg.max_hedge_size
        t = self.state.t
        p1, p2 = self.markets
        client_value = self.blended("mid", t) * s.client_position
        target1 = -w * client_value / p1.mid[t] - s.hedge1_position
        target2 = -(1 - w) * client_value / p2.mid[t] - s.hedge2_position
        h1, h2 = np.clip([target1, target2], -m, m)
        if self.cfg.convex_parametrization:
            total = h1 + h2
            return np.array([h1 / total if total else 0.5, total])
        return np.array([h1, h2])

    def step(self, action):
        s, cfg = self.state, self.cfg
        if s.done:
            raise StateError("step() called on a finished episode; call reset()")
        t = s.t
        (p1, p2), (f1, f2) = self.markets, self.flows
        h1, h2, clipped = self.hedges_from_action(action)

        mid_b = self.blended("mid", t)
        bid_b, ask_b = self.blended("client_bid", t), self.blended("client_ask", t)
        bid_size = float(blend_sizes(f1.bid_size[t], f2.bid_size[t], cfg.w))
        ask_size = float(blend_sizes(f1.ask_size[t], f2.ask_size[t], cfg.w))
        client_spread = bid_size * (mid_b - bid_b) + ask_size * (ask_b - mid_b)
        s.client_position += bid_size - ask_size

        hedge1_spread = -abs(h1) * _half_spread(p1, t, h1) if h1 else 0.0
        hedge2_spread = -abs(h2) * _half_spread(p2, t, h2) if h2 else 0.0
        s.hedge1_position += h1
        s.hedge2_position += h2

        next_mid_b = self.blended("mid", t + 1)
        client_reval = s.client_position * (next_mid_b - mid_b)
        hedge1_reval = s.hedge1_position * (p1.mid[t + 1] - p1.mid[t])
        hedge2_reval = s.hedge2_position * (p2.mid[t + 1] - p2.mid[t])
        client_pnl = client_spread + client_reval
        hedge1_pnl = hedge1_spread + hedge1_reval
        hedge2_pnl = hedge2_spread + hedge2_reval
        s.client_pnl += client_pnl
        s.hedge1_pnl += hedge1_pnl
        s.hedge2_pnl += hedge2_pnl
        s.client_spread_pnl += client_spread
        s.hedge_spread_pnl += hedge1_spread + hedge2_spread

        s.t += 1
        client_value, v1, v2, value = self.values(s.t)
        over = overhedge(v1, client_value) + overhedge(v2, client_value)
        penalty = float(portfolio_penalty(value, over, cfg))
        reward = reward_portfolio(client_pnl, hedge1_pnl, hedge2_pnl, penalty)

        terminated = abs(value) > cfg.termination_multiple * cfg.value_scale
        if terminated:
            reward -= float(portfolio_penalty(cfg.termination_multiple * cfg.value_scale, 0.0, cfg))
        truncated = not terminated and s.t >= self.episode_length
        s.done = terminated or truncated

        hedge_pos = s.hedge1_position + s.hedge2_position
        market_pnl = s.net_pnl - s.client_spread_pnl - s.hedge_spread_pnl
        self.records.append({
            "step": t, "mid": mid_b, "client_bid": bid_b, "client_ask": ask_b,
            "hedge_bid": self.blended("hedge_bid", t), "hedge_ask": self.blended("hedge_ask", t),
            "client_bid_size": bid_size, "client_ask_size": ask_size,
            "action_hedge": h1 + h2, "action_skew": 0.0,
            "client_pos": s.client_position, "hedge_pos": hedge_pos,
            "net_pos": s.client_position + hedge_pos,
            "client_pnl": s.client_spread_pnl, "hedge_pnl": s.hedge_spread_pnl,
            "market_pnl": market_pnl, "net_pnl": s.net_pnl,
            "penalty": penalty, "reward": reward, "done": s.done,
            "mid1": p1.mid[t], "mid2": p2.mid[t], "blended_mid": mid_b,
            "hedge1_pos": s.hedge1_position, "hedge2_pos": s.hedge2_position,
            "hedge1_pnl": s.hedge1_pnl, "hedge2_pnl": s.hedge2_pnl,
            "portfolio_value": value, "overhedge": over,
        })
        trades = [("client", bid_size, bid_b), ("client", -ask_size, ask_b)]
        if h1:
            trades.append(("hedge1", h1, p1.hedge_ask[t] if h1 > 0 else p1.hedge_bid[t]))
        if h2:
            trades.append(("hedge2", h2, p2.hedge_ask[t] if h2 > 0 else p2.hedge_bid[t]))
        info = {
            "penalty": penalty, "clipped": clipped, "trades": trades,
            "portfolio_value": value, "overhedge": over, "client_value": client_value,
            "hedge_values": (v1, v2), "net_position": s.client_position + hedge_pos,
            "net_pnl": s.net_pnl,
            "terminated": terminated, "truncated": truncated,
            "step_pnl": (client_pnl, hedge1_pnl, hedge2_pnl),
        }
        return self.observation(), float(reward), s.done, info
