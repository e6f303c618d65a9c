"""Seeded market data: log-normal mid paths, rolling volatility and
stochastic bid/ask spreads for the client and hedge venues.

All data for an episode is generated up front, so the mean volatility of the
whole simulation is known when spreads are clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError, ParameterError

# Row order of the spread noise matrix.
SPREAD_SIDES = ("client_bid", "client_ask", "hedge_bid", "hedge_ask")


@dataclass(frozen=True)
class MarketConfig:
    s0: float = 100.0
    mu: float = 0.0
    sigma: float = 0.02
    n_steps: int = 128
    window: int = 20
    nu_client: float = 1.5
    nu_hedge: float = 1.0
    gamma_spread: float = 0.5
    spread_clamp_lo: float = 0.1
    spread_clamp_hi: float = 2.5
    # Unit-time episodes by default; override only for hand-checked examples.
    dt_override: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ConfigError(f"s0 must be positive, got {self.s0}")
        if not self.sigma >= 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.n_steps < 2:
            raise ConfigError(f"n_steps must be at least 2, got {self.n_steps}")
        if not 1 <= self.window <= self.n_steps:
            raise ConfigError(f"window must lie in [1, n_steps], got {self.window}")
        if self.nu_client < 0 or self.nu_hedge < 0:
            raise ConfigError("spread multipliers must be non-negative")
        if self.gamma_spread < 0:
            raise ConfigError("gamma_spread must be non-negative")
        if not 0 < self.spread_clamp_lo < self.spread_clamp_hi:
            raise ConfigError("need 0 < spread_clamp_lo < spread_clamp_hi")
        if self.dt_override is not None and not self.dt_override > 0:
            raise ConfigError("dt_override must be positive")

    @property
    def dt(self) -> float:
        return self.dt_override if self.dt_override is not None else 1.0 / self.n_steps

    @property
    def addon_scale(self) -> float:
        """Standard deviation of the normal underlying the log-normal add-on."""
        return self.gamma_spread * self.s0 * self.sigma / math.sqrt(self.n_steps)


@dataclass
class MarketPath:
    mid: np.ndarray
    client_bid: np.ndarray
    client_ask: np.ndarray
    hedge_bid: np.ndarray
    hedge_ask: np.ndarray
    rolling_vol: np.ndarray
    mean_vol: float

    def __len__(self) -> int:
        return len(self.mid)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "mid": self.mid,
            "client_bid": self.client_bid,
            "client_ask": self.client_ask,
            "hedge_bid": self.hedge_bid,
            "hedge_ask": self.hedge_ask,
            "rolling_vol": self.rolling_vol,
        }

    @classmethod
    def flat(cls, n_steps: int, mid: float = 100.0, half_spread: float = 0.0) -> "MarketPath":
        """Constant market with symmetric fixed spreads; handy for tests."""
        m = np.full(n_steps, float(mid))
        return cls(m, m - half_spread, m + half_spread, m - half_spread,
                   m + half_spread, np.zeros(n_steps), 0.0)


@dataclass
class NoiseDraws:
    """Standard-normal draws for one episode, one row per stream."""

    eps: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, n_draws: int, n_steps: int) -> "NoiseDraws":
        return cls(rng.standard_normal((n_draws, n_steps)))

    def __post_init__(self):
        self.eps = np.atleast_2d(np.asarray(self.eps, dtype=float))
        if not np.all(np.isfinite(self.eps)):
            raise DataError("noise draws contain non-finite values")


def correlate(eps1, eps_indep, rho: float):
    """Mix a driver draw with an independent one to get correlation ``rho``."""
    if not abs(rho) <= 1.0:
        raise ParameterError(f"correlation must lie in [-1, 1], got {rho}")
    return rho * np.asarray(eps1) + math.sqrt(1.0 - rho * rho) * np.asarray(eps_indep)


def log_increments(cfg: MarketConfig, draws: np.ndarray) -> np.ndarray:
    """Per-step log-price increments; index 0 is zero so the path starts at s0."""
    draws = np.asarray(draws, dtype=float)
    if draws.shape != (cfg.n_steps,):
        raise DataError(f"expected {cfg.n_steps} draws, got shape {draws.shape}")
    if not np.all(np.isfinite(draws)):
        raise DataError("price draws contain non-finite values")
    dt = cfg.dt
    inc = (cfg.mu - 0.5 * cfg.sigma**2) * dt + cfg.sigma * draws * math.sqrt(dt)
    inc[0] = 0.0
    return inc


def generate_mid_path(cfg: MarketConfig, draws: np.ndarray) -> np.ndarray:
    """Euler discretisation of the log-normal process, ``mid[0] == s0``."""
    return cfg.s0 * np.exp(np.cumsum(log_increments(cfg, draws)))


def rolling_volatility(mid: np.ndarray, window: int, n_steps: int) -> np.ndarray:
    """Sample stdev of price levels over the trailing window, over sqrt(n_steps).

    Uses the available prefix while fewer than ``window`` points exist; the
    first value is 0.
    """
    if window < 1:
        raise ParameterError("window must be at least 1")
    mid = np.asarray(mid, dtype=float)
    n = len(mid)
    out = np.zeros(n)
    head = min(window - 1, n)
    for t in range(1, head):
        out[t] = np.std(mid[: t + 1], ddof=1)
    if n >= window and window > 1:
        out[window - 1:] = np.std(sliding_window_view(mid, window), axis=1, ddof=1)
    return out / math.sqrt(n_steps)


def spread_offsets(cfg: MarketConfig, rolling_vol: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Unclamped spread offsets: rolling vol plus a log-normal add-on."""
    return np.asarray(rolling_vol) + np.exp(cfg.addon_scale * np.asarray(eps))


def clamp_offsets(cfg: MarketConfig, delta: np.ndarray, mean_vol: float) -> np.ndarray:
    return np.clip(delta, cfg.spread_clamp_lo * mean_vol, cfg.spread_clamp_hi * mean_vol)


def generate_spreads(cfg: MarketConfig, mid: np.ndarray, rolling_vol: np.ndarray,
                     draws: NoiseDraws) -> MarketPath:
    """Attach client and hedge quotes to a mid path.

    ``draws.eps`` needs four rows, used in the order of ``SPREAD_SIDES``.
    """
    mid = np.asarray(mid, dtype=float)
    rolling_vol = np.asarray(rolling_vol, dtype=float)
    if draws.eps.shape[0] < 4 or draws.eps.shape[1] != len(mid) or len(rolling_vol) != len(mid):
        raise DataError("mid, rolling_vol and spread draws must have consistent length")
    mean_vol = float(np.mean(rolling_vol))
    deltas = clamp_offsets(cfg, spread_offsets(cfg, rolling_vol, draws.eps[:4]), mean_vol)
    cb, ca, hb, ha = deltas
    path = MarketPath(
        mid=mid,
        client_bid=mid - cfg.nu_client * cb,
        client_ask=mid + cfg.nu_client * ca,
        hedge_bid=mid - cfg.nu_hedge * hb,
        hedge_ask=mid + cfg.nu_hedge * ha,
        rolling_vol=rolling_vol,
        mean_vol=mean_vol,
    )
    if np.any(path.client_bid <= 0) or np.any(path.hedge_bid <= 0):
        raise ConfigError("spread configuration produces non-positive bid prices")
    return path


def generate_market(cfg: MarketConfig, rng: np.random.Generator | None = None,
                    rho: float = 0.0, n_assets: int = 1,
                    cfg2: MarketConfig | None = None) -> list[MarketPath]:
    """Generate one market path, or two with log increments correlated by ``rho``.

    Draw order is fixed (price noise, then spread noise per asset) so the
    same generator state always yields bit-identical paths.
    """
    if n_assets not in (1, 2):
        raise ParameterError(f"n_assets must be 1 or 2, got {n_assets}")
    if not abs(rho) <= 1.0:
        raise ParameterError(f"correlation must lie in [-1, 1], got {rho}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    cfgs = [cfg] if n_assets == 1 else [cfg, cfg2 or cfg]
    if n_assets == 2 and cfgs[1].n_steps != cfg.n_steps:
        raise ConfigError("both assets must share n_steps")

    price = NoiseDraws.draw(rng, n_assets, cfg.n_steps).eps
    if n_assets == 2:
        price[1] = correlate(price[0], price[1], rho)
    paths = []
    for c, eps in zip(cfgs, price):
        mid = generate_mid_path(c, eps)
        vol = rolling_volatility(mid, c.window, c.n_steps)
        paths.append(generate_spreads(c, mid, vol, NoiseDraws.draw(rng, 4, c.n_steps)))
    return paths
