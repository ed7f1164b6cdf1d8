"""Parametric monotone functions on [0, 1] with their primitives.

Model specifications need the target function, its derivative, its
primitive and the inverse of the primitive; the closed forms here keep
sampling exact, and :class:`Custom` falls back to numerical quadrature and
root finding for user-supplied handles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["MonotoneFunction", "Linear", "Exponential", "Custom", "function_from_dict"]


class MonotoneFunction:
    """Base class. Subclasses provide ``__call__`` and ``derivative``."""

    def __call__(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def cumulative(self, t):
        """Primitive vanishing at 0."""
        t = np.asarray(t, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(48)
        nodes = 0.5 * (nodes + 1.0)
        pts = t[..., None] * nodes
        out = t * (np.asarray(self(pts)) @ (0.5 * weights))
        return float(out) if out.ndim == 0 else out

    def inverse_cumulative(self, v, hi: float = 1.0):
        """Solve ``cumulative(t) = v`` for t in [0, hi] by bisection.

        Requires the primitive to be increasing (positive function).
        """
        v = np.asarray(v, dtype=float)
        a = np.zeros_like(v)
        b = np.full_like(v, hi)
        for _ in range(60):
            m = 0.5 * (a + b)
            below = self.cumulative(m) < v
            a = np.where(below, m, a)
            b = np.where(below, b, m)
        out = 0.5 * (a + b)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} is not serialisable")

    @property
    def affine(self):
        return None


@dataclass(frozen=True)
class Linear(MonotoneFunction):
    """``t -> intercept + slope * t``."""

    intercept: float
    slope: float

    def __call__(self, t):
        return self.intercept + self.slope * np.asarray(t, dtype=float)

    def derivative(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.slope)

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        return self.intercept * t + 0.5 * self.slope * t * t

    def inverse_cumulative(self, v, hi: float = 1.0):
        # stable root of slope/2 t^2 + intercept t - v = 0
        v = np.asarray(v, dtype=float)
        disc = self.intercept**2 + 2.0 * self.slope * v
        return 2.0 * v / (self.intercept + np.sqrt(np.maximum(disc, 0.0)))

    @property
    def affine(self):
        return (self.intercept, self.slope)

    def to_dict(self) -> dict:
        return {"kind": "linear", "intercept": self.intercept, "slope": self.slope}


@dataclass(frozen=True)
class Exponential(MonotoneFunction):
    """``t -> scale * exp(rate * t)``."""

    scale: float
    rate: float

    def __call__(self, t):
        return self.scale * np.exp(self.rate * np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.rate * self(t)

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        if self.rate == 0.0:
            return self.scale * t
        return self.scale * np.expm1(self.rate * t) / self.rate

    def inverse_cumulative(self, v, hi: float = 1.0):
        v = np.asarray(v, dtype=float)
        if self.rate == 0.0:
            return v / self.scale
        return np.log1p(self.rate * v / self.scale) / self.rate

    def to_dict(self) -> dict:
        return {"kind": "exponential", "scale": self.scale, "rate": self.rate}


class Custom(MonotoneFunction):
    """Wrap user-supplied vectorised handles."""

    def __init__(self, func: Callable, derivative: Callable, cumulative: Callable | None = None):
        self._func = func
        self._derivative = derivative
        self._cumulative = cumulative

    def __call__(self, t):
        return self._func(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self._derivative(np.asarray(t, dtype=float))

    def cumulative(self, t):
        if self._cumulative is not None:
            return self._cumulative(np.asarray(t, dtype=float))
        return super().cumulative(t)


def function_from_dict(d: dict) -> MonotoneFunction:
    kind = d.get("kind")
    if kind == "linear":
        return Linear(float(d["intercept"]), float(d["slope"]))
    if kind == "exponential":
        return Exponential(float(d["scale"]), float(d["rate"]))
    raise ValueError(f"unknown function kind {kind!r}")

