"""Tanh-squashed Gaussian policy head.

The policy network outputs ``[mean, log_std]`` per action dimension. Samples
are ``a = tanh(mean + std * xi)`` in ``[-1, 1]`` and then affinely mapped to
the action box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log1m_tanh_sq(z: np.ndarray) -> np.ndarray:
    """``log(1 - tanh(z)**2)`` without cancellation for large |z|."""
    return 2.0 * (math.log(2.0) - z - np.logaddexp(0.0, -2.0 * z))


@dataclass
class SquashedSample:
    """Everything the backward pass needs from one batch of draws."""

    mean: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    xi: np.ndarray
    z: np.ndarray
    action: np.ndarray      # in [-1, 1]
    log_prob: np.ndarray    # shape (batch,), density of ``action``
    in_range: np.ndarray    # log_std not clamped

    def backward(self, d_action: np.ndarray, d_log_prob: np.ndarray) -> np.ndarray:
        """Map upstream gradients to gradients on the raw ``[mean, log_std]`` output."""
        tanh_z = self.action
        d_log_prob = np.asarray(d_log_prob, dtype=float).reshape(-1, 1)
        dz = d_action * (1.0 - tanh_z**2) + d_log_prob * 2.0 * tanh_z
        d_mean = dz
        d_log_std = (dz * self.std * self.xi - d_log_prob) * self.in_range
        return np.concatenate([d_mean, d_log_std], axis=1)


def squash(raw: np.ndarray, xi: np.ndarray | None) -> SquashedSample:
    """Squash raw policy outputs; ``xi=None`` gives the deterministic mode."""
    raw = np.atleast_2d(raw)
    act_dim = raw.shape[1] // 2
    mean = raw[:, :act_dim]
    raw_log_std = raw[:, act_dim:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    in_range = ((raw_log_std >= LOG_STD_MIN) & (raw_log_std <= LOG_STD_MAX)).astype(float)
    std = np.exp(log_std)
    if xi is None:
        xi = np.zeros_like(mean)
    z = mean + std * xi
    action = np.tanh(z)
    log_prob = np.sum(-0.5 * xi**2 - log_std - _HALF_LOG_2PI - log1m_tanh_sq(z), axis=1)
    return SquashedSample(mean, log_std, std, xi, z, action, log_prob, in_range)


class ActionBox:
    """Affine map between ``[-1, 1]^d`` and the environment's action box."""

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.center = 0.5 * (self.high + self.low)
        self.scale = 0.5 * (self.high - self.low)
        self.log_det = float(np.sum(np.log(self.scale)))

    def to_env(self, a: np.ndarray) -> np.ndarray:
        return np.clip(self.center + self.scale * a, self.low, self.high)

    def to_unit(self, a: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(a) - self.center) / self.scale, -1.0, 1.0)
