"""Single-asset hedging environments (plain, skew, price-of-risk).

Within one step t -> t+1 events happen in this order:

1. skew moves one client quote toward mid and boosts that side's flow rate;
2. client trades fill at t's (adjusted) client quotes;
3. the hedge order fills at t's hedge quotes (buy at ask, sell at bid);
4. the market moves to t+1 and the net position is revalued;
5. the position penalty and reward are computed and termination checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, StateError
from .flow import FlowConfig, FlowPath, generate_flow, skew_adjusted_prices, skew_rate_boost
from .market import MarketConfig, MarketPath, generate_market

MODES = ("single", "skew", "price_of_risk")

EPISODE_COLUMNS = (
    "step", "mid", "client_bid", "client_ask", "hedge_bid", "hedge_ask",
    "client_bid_size", "client_ask_size", "action_hedge", "action_skew",
    "client_pos", "hedge_pos", "net_pos", "client_pnl", "hedge_pnl",
    "market_pnl", "net_pnl", "penalty", "reward", "done",
)
SPREAD_COLUMNS = ("maker_spread", "taker_spread")


@dataclass(frozen=True)
class EnvConfig:
    mode: str = "single"
    max_hedge_size: float = 10.0
    max_pos_limit: float = 50.0
    gamma_penalty: float = 0.1
    termination_multiple: float = 2.0
    # None means the penalty at the termination boundary.
    terminal_extra_penalty: float | None = None
    literal_price_of_risk: bool = False
    spread_window: int = 20
    market: MarketConfig = field(default_factory=MarketConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.max_hedge_size > 0:
            raise ConfigError("max_hedge_size must be positive")
        if not self.max_pos_limit > 0:
            raise ConfigError("max_pos_limit must be positive")
        if self.gamma_penalty < 0:
            raise ConfigError("gamma_penalty must be non-negative")
        if not self.termination_multiple > 1:
            raise ConfigError("termination_multiple must exceed 1")
        if self.spread_window < 1:
            raise ConfigError("spread_window must be at least 1")
        flow = replace(self.flow, max_hedge_size=self.max_hedge_size)
        if self.mode == "price_of_risk":
            flow = replace(flow, beta_skew=0.0)
        object.__setattr__(self, "flow", flow)

    @property
    def has_skew(self) -> bool:
        return self.mode != "single"

    @property
    def terminal_penalty(self) -> float:
        if self.terminal_extra_penalty is not None:
            return self.terminal_extra_penalty
        return position_penalty(self.termination_multiple * self.max_pos_limit, self)


@dataclass
class PnlBreakdown:
    client_spread_pnl: float = 0.0
    hedge_spread_pnl: float = 0.0
    market_reval_pnl: float = 0.0

    @property
    def total(self) -> float:
        return self.client_spread_pnl + self.hedge_spread_pnl + self.market_reval_pnl


@dataclass
class HedgerState:
    t: int = 0
    client_position: float = 0.0
    hedge_position: float = 0.0
    client_pnl: float = 0.0
    hedge_pnl: float = 0.0
    market_pnl: float = 0.0
    history: list[PnlBreakdown] = field(default_factory=list)
    done: bool = False

    @property
    def net_position(self) -> float:
        return self.client_position + self.hedge_position

    @property
    def net_pnl(self) -> float:
        return self.client_pnl + self.hedge_pnl + self.market_pnl


@dataclass
class AgentAction:
    hedge_size: float = 0.0
    skew: float = 0.0


def clip_action(action: AgentAction, max_hedge_size: float) -> tuple[AgentAction, bool]:
    """Clip to the action box; the flag reports whether anything moved."""
    hedge = float(np.clip(action.hedge_size, -max_hedge_size, max_hedge_size))
    skew = float(np.clip(action.skew, -1.0, 1.0))
    clipped = hedge != action.hedge_size or skew != action.skew
    return AgentAction(hedge, skew), clipped


def position_penalty(position, cfg: EnvConfig):
    """Exponential inventory charge, zero at flat and symmetric in sign."""
    limit = cfg.max_pos_limit
    return cfg.gamma_penalty * cfg.market.s0 * np.expm1(np.abs(position) / limit) * limit


def reward_single(pnl: PnlBreakdown, penalty: float) -> float:
    return pnl.client_spread_pnl + pnl.hedge_spread_pnl + pnl.market_reval_pnl - penalty


def reward_price_of_risk(pnl: PnlBreakdown, penalty: float, literal: bool = False) -> float:
    """Reward that drives client spread income toward the hedging cost.

    ``literal=True`` keeps ``max(-|client + hedge|, 0)`` as printed, a term
    that is always zero.
    """
    spread = pnl.client_spread_pnl + pnl.hedge_spread_pnl
    term = max(-abs(spread), 0.0) if literal else -abs(spread)
    return term + pnl.market_reval_pnl - penalty


def hedge_half_spread(path: MarketPath, t: int, size: float) -> float:
    if size > 0:
        return path.hedge_ask[t] - path.mid[t]
    return path.mid[t] - path.hedge_bid[t]


def _rolling_ratio(num: list[float], den: list[float], window: int) -> float:
    d = math.fsum(den[-window:])
    if d <= 0:
        return math.nan
    return math.fsum(num[-window:]) / d


class HedgeEnv:
    """Gym-style environment over one asset.

    ``market``/``flow`` may be injected to replay fixed data; otherwise each
    ``reset(seed)`` draws a fresh episode from the config.
    """

    def __init__(self, cfg: EnvConfig | None = None, market: MarketPath | None = None,
                 flow: FlowPath | None = None):
        self.cfg = cfg or EnvConfig()
        self._fixed_market = market
        self._fixed_flow = flow
        if (market is None) != (flow is None):
            raise ConfigError("inject market and flow together")
        if market is not None and len(market) != len(flow):
            raise ConfigError("injected market and flow lengths differ")
        self.action_dim = 2 if self.cfg.has_skew else 1
        self.obs_dim = 1
        m = self.cfg.max_hedge_size
        self.action_low = np.array([-m, -1.0][: self.action_dim])
        self.action_high = np.array([m, 1.0][: self.action_dim])
        self.market: MarketPath | None = None
        self.flow: FlowPath | None = None
        self.state = HedgerState(done=True)
        self.records: list[dict] = []

    @property
    def episode_length(self) -> int:
        return len(self.market) - 1

    def reset(self, seed: int | None = None) -> np.ndarray:
        if self._fixed_market is not None:
            self.market, self.flow = self._fixed_market, self._fixed_flow
        else:
            rng = np.random.default_rng(seed)
            self.market = generate_market(self.cfg.market, rng)[0]
            self.flow = generate_flow(self.cfg.flow, self.cfg.market, self.market, rng)
        self.state = HedgerState()
        self.records = []
        self._client_volume: list[float] = []
        self._client_income: list[float] = []
        self._hedge_volume: list[float] = []
        self._hedge_cost: list[float] = []
        return self.observation()

    def observation(self) -> np.ndarray:
        return np.array([self.state.net_position / self.cfg.max_pos_limit])

    def to_action(self, action) -> AgentAction:
        if isinstance(action, AgentAction):
            return action
        a = np.atleast_1d(np.asarray(action, dtype=float))
        skew = float(a[1]) if self.cfg.has_skew and len(a) > 1 else 0.0
        return AgentAction(float(a[0]), skew)

    def heuristic_action(self) -> np.ndarray:
        """Offset the whole current net position, up to the hedge limit."""
        m = self.cfg.max_hedge_size
        hedge = float(np.clip(-self.state.net_position, -m, m))
        return np.array([hedge, 0.0][: self.action_dim])

    def step(self, action):
        s = self.state
        if s.done:
            raise StateError("step() called on a finished episode; call reset()")
        cfg, path, t = self.cfg, self.market, s.t
        act, clipped = clip_action(self.to_action(action), cfg.max_hedge_size)
        if not cfg.has_skew:
            act.skew = 0.0
        mid = path.mid[t]

        bid_px, ask_px = skew_adjusted_prices(path.client_bid[t], path.client_ask[t], mid, act.skew)
        bid_boost, ask_boost = skew_rate_boost(act.skew, cfg.flow, self.flow.rate[t])
        bid_size, ask_size = self.flow.sizes_at(t, bid_boost, ask_boost)
        client_pnl = bid_size * (mid - bid_px) + ask_size * (ask_px - mid)
        s.client_position += bid_size - ask_size

        hedge = act.hedge_size
        hedge_cost = abs(hedge) * hedge_half_spread(path, t, hedge) if hedge != 0 else 0.0
        hedge_px = path.hedge_ask[t] if hedge > 0 else path.hedge_bid[t]
        s.hedge_position += hedge

        market_pnl = s.net_position * (path.mid[t + 1] - mid)
        pnl = PnlBreakdown(client_pnl, -hedge_cost, market_pnl)
        s.client_pnl += pnl.client_spread_pnl
        s.hedge_pnl += pnl.hedge_spread_pnl
        s.market_pnl += pnl.market_reval_pnl
        s.history.append(pnl)

        penalty = float(position_penalty(s.net_position, cfg))
        if cfg.mode == "price_of_risk":
            reward = reward_price_of_risk(pnl, penalty, cfg.literal_price_of_risk)
        else:
            reward = reward_single(pnl, penalty)

        terminated = abs(s.net_position) > cfg.termination_multiple * cfg.max_pos_limit
        if terminated:
            reward -= cfg.terminal_penalty
        s.t += 1
        truncated = not terminated and s.t >= self.episode_length
        s.done = terminated or truncated

        self._client_volume.append(bid_size + ask_size)
        self._client_income.append(client_pnl)
        self._hedge_volume.append(abs(hedge))
        self._hedge_cost.append(hedge_cost)

        record = {
            "step": t, "mid": mid, "client_bid": bid_px, "client_ask": ask_px,
            "hedge_bid": path.hedge_bid[t], "hedge_ask": path.hedge_ask[t],
            "client_bid_size": bid_size, "client_ask_size": ask_size,
            "action_hedge": hedge, "action_skew": act.skew,
            "client_pos": s.client_position, "hedge_pos": s.hedge_position,
            "net_pos": s.net_position, "client_pnl": s.client_pnl,
            "hedge_pnl": s.hedge_pnl, "market_pnl": s.market_pnl, "net_pnl": s.net_pnl,
            "penalty": penalty, "reward": reward, "done": s.done,
        }
        if cfg.mode == "price_of_risk":
            record["maker_spread"], record["taker_spread"] = self.maker_taker_spreads()
        self.records.append(record)

        trades = [("client", float(bid_size), bid_px), ("client", -float(ask_size), ask_px)]
        if hedge != 0:
            trades.append(("hedge", hedge, hedge_px))
        info = {
            "pnl": pnl, "penalty": penalty, "clipped": clipped, "trades": trades,
            "net_position": s.net_position, "net_pnl": s.net_pnl, "terminated": terminated,
            "truncated": truncated, "next_mid": path.mid[t + 1],
        }
        return self.observation(), float(reward), s.done, info

    def maker_taker_spreads(self) -> tuple[float, float]:
        """Size-weighted rolling per-unit client half-spread earned and hedge
        half-spread paid over the last ``spread_window`` steps; NaN when a side
        has not traded in the window."""
        w = self.cfg.spread_window
        return (_rolling_ratio(self._client_income, self._client_volume, w),
                _rolling_ratio(self._hedge_cost, self._hedge_volume, w))


class PositionToZeroEnv:
    """Deterministic control toy: start away from flat, hedge back to zero.

    Reward is minus the position penalty; there is no market or client flow.
    """

    def __init__(self, max_hedge_size: float = 10.0, max_pos_limit: float = 50.0,
                 n_steps: int = 32, gamma_penalty: float = 0.1, s0: float = 100.0):
        self.cfg = EnvConfig(max_hedge_size=max_hedge_size, max_pos_limit=max_pos_limit,
                             gamma_penalty=gamma_penalty,
                             market=MarketConfig(s0=s0, n_steps=max(n_steps, 2), window=1))
        self.n_steps = n_steps
        self.obs_dim, self.action_dim = 1, 1
        self.action_low = np.array([-max_hedge_size])
        self.action_high = np.array([max_hedge_size])
        self.position = 0.0
        self.t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.position = float(rng.uniform(-1.0, 1.0) * self.cfg.max_pos_limit)
        self.t = 0
        return np.array([self.position / self.cfg.max_pos_limit])

    def step(self, action):
        hedge = float(np.clip(np.atleast_1d(action)[0], -self.cfg.max_hedge_size,
                              self.cfg.max_hedge_size))
        self.position += hedge
        self.t += 1
        reward = -float(position_penalty(self.position, self.cfg))
        done = self.t >= self.n_steps
        obs = np.array([self.position / self.cfg.max_pos_limit])
        return obs, reward, done, {"net_position": self.position, "net_pnl": 0.0,
                                   "truncated": done, "terminated": False}
