"""Client trade flow: volatility-modulated Poisson sizes on each side of the
book, a price-correlated net intensity, and the skew elasticity model.

Sign convention: bid-side trades are clients selling to us at our bid, so
``net_size = bid_size - ask_size`` is the change in our long position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import ActionBoundError, ConfigError, DegenerateMarketError, ParameterError
from .market import MarketConfig, MarketPath, correlate


@dataclass(frozen=True)
class FlowConfig:
    c_scale: float = 2.0
    alpha_flow: float = 1.0
    beta_flow: float = 0.8
    rho_flow: float = 0.7
    beta_skew: float = 4.0
    max_hedge_size: float = 10.0
    intensity_smoothing_window: int = 10

    def __post_init__(self):
        if not self.c_scale > 0:
            raise ConfigError("c_scale must be positive")
        if self.alpha_flow < 0:
            raise ConfigError("alpha_flow must be non-negative")
        if self.beta_skew < 0:
            raise ConfigError("beta_skew must be non-negative")
        if not self.max_hedge_size > 0:
            raise ConfigError("max_hedge_size must be positive")
        if not abs(self.rho_flow) <= 1:
            raise ConfigError("rho_flow must lie in [-1, 1]")
        if self.intensity_smoothing_window < 1:
            raise ConfigError("intensity_smoothing_window must be at least 1")


@dataclass
class FlowPath:
    """Pre-drawn client flow for one episode.

    ``bid_size``/``ask_size`` are the base Poisson draws. Skew can add extra
    Poisson flow on one side; that extra is read off the pre-drawn uniforms
    ``boost_u`` by inverse CDF, so the random stream consumed never depends
    on the actions taken.
    """

    bid_size: np.ndarray
    ask_size: np.ndarray
    net_intensity: np.ndarray
    rate: np.ndarray
    boost_u: np.ndarray

    @property
    def net_size(self) -> np.ndarray:
        return self.bid_size - self.ask_size

    def __len__(self) -> int:
        return len(self.bid_size)

    def sizes_at(self, t: int, bid_boost: float = 0.0, ask_boost: float = 0.0) -> tuple[int, int]:
        bid = int(self.bid_size[t]) + _boost_draw(self.boost_u[0, t], bid_boost)
        ask = int(self.ask_size[t]) + _boost_draw(self.boost_u[1, t], ask_boost)
        return bid, ask

    @classmethod
    def zeros(cls, n_steps: int) -> "FlowPath":
        z = np.zeros(n_steps)
        return cls(z.astype(np.int64), z.astype(np.int64), z, z.copy(), np.full((2, n_steps), 0.5))

    @classmethod
    def scripted(cls, bid_size, ask_size) -> "FlowPath":
        """Fixed sizes and unit rate; for hand-built scenarios."""
        bid = np.asarray(bid_size, dtype=np.int64)
        ask = np.asarray(ask_size, dtype=np.int64)
        n = len(bid)
        return cls(bid, ask, np.zeros(n), np.ones(n), np.full((2, n), 0.5))


def _boost_draw(u: float, boost: float) -> int:
    if boost <= 0:
        return 0
    return int(poisson.ppf(u, boost))


def client_trade_rate(cfg: FlowConfig, rolling_vol, mean_vol: float):
    """Overall Poisson magnitude, rising with the volatility ratio."""
    if not mean_vol > 0:
        raise DegenerateMarketError("mean volatility must be positive")
    return cfg.c_scale * (cfg.alpha_flow + np.asarray(rolling_vol) / mean_vol)


def intensity_multipliers(lambda_net):
    """Bid and ask multipliers for a net intensity; a side shuts off past |1|."""
    lam = np.asarray(lambda_net, dtype=float)
    return np.maximum(1.0 - lam, 0.0), np.maximum(1.0 + lam, 0.0)


def log_price_signal(log_mid: np.ndarray, market: MarketConfig, window: int) -> np.ndarray:
    """Standardised trailing log-price change over up to ``window`` steps.

    The change is centred on its drift and divided by its model stdev, so the
    signal is unit-variance under the simulated process. Zero at t=0 and for
    a zero-volatility market.
    """
    log_mid = np.asarray(log_mid, dtype=float)
    n = len(log_mid)
    out = np.zeros(n)
    if market.sigma == 0 or n < 2:
        return out
    t = np.arange(1, n)
    k = np.minimum(t, window)
    change = log_mid[t] - log_mid[t - k]
    drift = (market.mu - 0.5 * market.sigma**2) * k * market.dt
    out[1:] = (change - drift) / (market.sigma * np.sqrt(k * market.dt))
    return out


def net_intensity(signal: np.ndarray, cfg: FlowConfig, indep_draws: np.ndarray) -> np.ndarray:
    """Net intensity correlated with the log-price signal at ``rho_flow``."""
    signal = np.asarray(signal, dtype=float)
    indep_draws = np.asarray(indep_draws, dtype=float)
    if signal.shape != indep_draws.shape:
        raise ParameterError("signal and independent draws must be aligned")
    return cfg.beta_flow * correlate(signal, indep_draws, cfg.rho_flow)


def draw_client_sizes(rate, multipliers, rng: np.random.Generator):
    """Poisson bid/ask sizes; returns ``(bid, ask, net)``."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0):
        raise ParameterError("client trade rate must be non-negative")
    bid_mult, ask_mult = multipliers
    bid = rng.poisson(rate * bid_mult)
    ask = rng.poisson(rate * ask_mult)
    return bid, ask, bid - ask


def skew_flow_delta(skew: float, cfg: FlowConfig, client_trade_rate: float) -> float:
    """Signed extra client flow from skewing: negative pulls in bid-side flow."""
    if not abs(skew) <= 1.0:
        raise ActionBoundError(f"skew must lie in [-1, 1], got {skew}")
    if skew == 0 or cfg.beta_skew == 0:
        return 0.0
    if not client_trade_rate > 0:
        raise ParameterError("client trade rate must be positive to scale skew flow")
    return skew * cfg.beta_skew * cfg.max_hedge_size / client_trade_rate


def skew_rate_boost(skew: float, cfg: FlowConfig, client_trade_rate: float) -> tuple[float, float]:
    """Split the skew flow delta into (bid boost, ask boost) Poisson rates."""
    if client_trade_rate <= 0:
        return 0.0, 0.0
    delta = skew_flow_delta(skew, cfg, client_trade_rate)
    return (-delta, 0.0) if delta < 0 else (0.0, delta)


def skew_adjusted_prices(bid: float, ask: float, mid: float, skew: float) -> tuple[float, float]:
    """Move one client quote toward mid: negative skew the bid, positive the ask."""
    if skew <= 0:
        return bid - skew * (mid - bid), ask
    return bid, ask - skew * (ask - mid)


def generate_flow(cfg: FlowConfig, market_cfg: MarketConfig, path: MarketPath,
                  rng: np.random.Generator) -> FlowPath:
    """Draw the base client flow for an episode on a given market path.

    Consumes, in order: intensity noise, bid sizes, ask sizes, skew uniforms.
    """
    n = len(path)
    rate = client_trade_rate(cfg, path.rolling_vol, path.mean_vol)
    signal = log_price_signal(np.log(path.mid), market_cfg, cfg.intensity_smoothing_window)
    lam = net_intensity(signal, cfg, rng.standard_normal(n))
    bid, ask, _ = draw_client_sizes(rate, intensity_multipliers(lam), rng)
    boost_u = rng.random((2, n))
    return FlowPath(bid.astype(np.int64), ask.astype(np.int64), lam, rate, boost_u)


def mean_client_trade_size(cfg: FlowConfig) -> float:
    """Expected per-side client size at average volatility and zero imbalance."""
    return cfg.c_scale * (cfg.alpha_flow + 1.0)

