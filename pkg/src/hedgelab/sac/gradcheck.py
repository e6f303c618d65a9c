"""Central finite-difference checks for the hand-written gradients."""

from __future__ import annotations

import numpy as np

from .mlp import Mlp
from .policy import squash


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a, n = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_gradient(f, params: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    """Central differences of the scalar ``f()`` w.r.t. each entry of ``params``."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = f()
            flat[i] = old - h
            down = f()
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def check_mlp(net: Mlp, x: np.ndarray, weights: np.ndarray, h: float = 1e-6) -> float:
    """Worst relative error of ``backward`` for ``sum(weights * net(x))``,
    covering parameter and input gradients."""

    def f():
        return float(np.sum(weights * net(x)))

    out, cache = net.forward(x)
    grads, dx = net.backward(cache, weights)
    numeric = numeric_gradient(f, net.params, h)
    x = x.copy()
    numeric_x = numeric_gradient(f, [x], h)[0]
    return max(max(relative_error(a, n) for a, n in zip(grads, numeric)),
               relative_error(dx, numeric_x))


def check_squashed_policy(net: Mlp, obs: np.ndarray, xi: np.ndarray, w_action: np.ndarray,
                          w_logp: np.ndarray, h: float = 1e-6) -> float:
    """Worst relative error for ``sum(w_action * a) + sum(w_logp * log_prob)``
    differentiated through the squashed-Gaussian head into the network."""

    def f():
        s = squash(net(obs), xi)
        return float(np.sum(w_action * s.action) + np.sum(w_logp * s.log_prob))

    raw, cache = net.forward(obs)
    sample = squash(raw, xi)
    grads, _ = net.backward(cache, sample.backward(w_action, w_logp))
    numeric = numeric_gradient(f, net.params, h)
    return max(relative_error(a, n) for a, n in zip(grads, numeric))
