"""Fully connected ReLU networks with hand-written reverse-mode gradients.

Layout is batch-major: inputs are ``(batch, in_dim)`` and each layer computes
``x @ W + b``. Hidden layers use ReLU; the output layer is affine.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import DataError, TrainingError


class Mlp:
    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 out_scale: float = 1.0):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise DataError(f"invalid layer sizes {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / math.sqrt(fan_in)
            if i == n_layers - 1:
                bound *= out_scale
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.params = [p.copy() for p in self.params]
        return other

    def zero_(self) -> "Mlp":
        for p in self.params:
            p.fill(0.0)
        return self

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return the output and the per-layer inputs needed by ``backward``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise DataError(f"expected input width {self.sizes[0]}, got {x.shape[1]}")
        cache = []
        h = x
        for i in range(self.n_layers):
            cache.append(h)
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W
            h += b
            if i < self.n_layers - 1:
                np.maximum(h, 0.0, out=h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list[np.ndarray], dout: np.ndarray,
                 params: bool = True) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(dout * output)`` w.r.t. parameters and input.

        With ``params=False`` only the input gradient is computed and the
        returned gradient list is empty.
        """
        grads: list[np.ndarray] = [None] * len(self.params) if params else []  # type: ignore[list-item]
        g = np.asarray(dout, dtype=float)
        for i in reversed(range(self.n_layers)):
            h = cache[i]
            W = self.params[2 * i]
            if params:
                grads[2 * i] = h.T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            g = g @ W.T
            if i > 0:
                # cache[i] is the post-ReLU activation of layer i-1.
                g[h <= 0] = 0.0
        return grads, g

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.params:
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)


def mse_loss_and_gradients(net: Mlp, x: np.ndarray, target: np.ndarray):
    """Mean squared error of ``net(x)`` against ``target`` and its parameter
    gradients. Raises ``TrainingError`` on a non-finite loss."""
    out, cache = net.forward(x)
    target = np.asarray(target, dtype=float).reshape(out.shape)
    resid = out - target
    loss = float(np.mean(resid**2))
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}; max |output| = {np.max(np.abs(out))}")
    grads, _ = net.backward(cache, 2.0 * resid / resid.size)
    return loss, grads


def polyak_update(target: Mlp, source: Mlp, tau: float) -> None:
    """In place: ``target <- (1 - tau) * target + tau * source``."""
    if not 0.0 <= tau <= 1.0:
        raise DataError(f"tau must lie in [0, 1], got {tau}")
    if target.sizes != source.sizes:
        raise DataError(f"shape mismatch {target.sizes} vs {source.sizes}")
    for t, s in zip(target.params, source.params):
        t *= 1.0 - tau
        t += tau * s


class Adam:
    """Adaptive moment estimation with bias correction, over a list of arrays."""

    def __init__(self, params: list[np.ndarray], lr: float = 3e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient")
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        return self.m + self.v
