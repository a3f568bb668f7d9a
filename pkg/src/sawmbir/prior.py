"""Pairwise 26-neighbour roughness penalty (quadratic or Huber potential).

    Phi(x) = beta * sum_j sum_{l in N(j)} kappa_jl * rho(x_j - x_l)

with ``kappa_jl`` the inverse Euclidean distance between voxel indices.  The
double sum visits each unordered pair twice; out-of-volume neighbours are
absent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

__all__ = ["Prior"]

# one representative of each +/- neighbour direction
_OFFSETS = [o for o in product((-1, 0, 1), repeat=3) if o > (0, 0, 0)]


def _pair_slices(shape, offset):
    a, b = [], []
    for n, o in zip(shape, offset):
        if o >= 0:
            a.append(slice(0, n - o))
            b.append(slice(o, n))
        else:
            a.append(slice(-o, n))
            b.append(slice(0, n + o))
    return tuple(a), tuple(b)


@dataclass(frozen=True)
class Prior:
    beta: float = 0.0
    potential: str = "quadratic"
    delta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("regularizer strength beta must be >= 0")
        if self.potential not in ("quadratic", "huber"):
            raise ValueError(f"unknown potential {self.potential!r}")
        if self.potential == "huber" and not self.delta > 0:
            raise ValueError("huber delta must be positive")

    def _pairs(self, shape):
        for off in _OFFSETS:
            sa, sb = _pair_slices(shape, off)
            yield 2.0 / math.sqrt(sum(o * o for o in off)), sa, sb

    def rho(self, t):
        if self.potential == "quadratic":
            return 0.5 * t * t
        a = np.abs(t)
        return np.where(a <= self.delta, 0.5 * t * t, self.delta * a - 0.5 * self.delta ** 2)

    def drho(self, t):
        if self.potential == "quadratic":
            return t
        return np.clip(t, -self.delta, self.delta)

    def curvature(self, t):
        """Half-quadratic surrogate curvature rho'(t)/t (<= 1)."""
        if self.potential == "quadratic":
            return np.ones_like(t)
        a = np.abs(t)
        return np.where(a <= self.delta, 1.0, self.delta / np.maximum(a, self.delta))

    def value(self, x: np.ndarray) -> float:
        if self.beta == 0:
            return 0.0
        total = 0.0
        for k, sa, sb in self._pairs(x.shape):
            total += k * float(np.sum(self.rho(x[sa] - x[sb])))
        return self.beta * total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x, dtype=np.float64)
        if self.beta == 0:
            return g
        for k, sa, sb in self._pairs(x.shape):
            t = (self.beta * k) * self.drho(x[sa] - x[sb])
            g[sa] += t
            g[sb] -= t
        return g

    def surrogate_curvature(self, x: np.ndarray, d: np.ndarray) -> float:
        """d^T H d for the quadratic majorizer of Phi at x (exact Hessian if quadratic)."""
        if self.beta == 0:
            return 0.0
        total = 0.0
        for k, sa, sb in self._pairs(x.shape):
            dd = d[sa] - d[sb]
            if self.potential == "quadratic":
                total += k * float(np.sum(dd * dd))
            else:
                total += k * float(np.sum(self.curvature(x[sa] - x[sb]) * dd * dd))
        return self.beta * total
