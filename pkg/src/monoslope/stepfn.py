"""Piecewise-constant and piecewise-linear functions on [0, 1]."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Union

import numpy as np

from .quadrature import DEFAULT_QUAD, QuadSettings, integrate_pieces

__all__ = [
    "StepFunction",
    "PiecewiseLinear",
    "make_step",
    "eval_upper",
    "lp_distance",
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Step function on [0, 1] stored as sorted knots and values.

    With ``side="right"`` (the default) the function is cadlag: ``values[i]``
    holds on ``[knots[i], knots[i+1])`` and ``value_at_0`` on ``[0, knots[0])``.
    With ``side="left"`` it is left-continuous instead: ``values[i]`` holds on
    ``(knots[i], knots[i+1]]`` and ``value_at_0`` on ``[0, knots[0]]``. The
    monotone estimators are stored this way.
    """

    knots: np.ndarray
    values: np.ndarray
    value_at_0: float = 0.0
    side: str = "right"

    def __post_init__(self):
        knots = _frozen(self.knots).reshape(-1)
        values = _frozen(self.values).reshape(-1)
        if knots.shape != values.shape:
            raise ValueError(f"{knots.size} knots but {values.size} values")
        if knots.size:
            if not np.all(np.isfinite(knots)) or knots[0] <= 0.0 or knots[-1] > 1.0:
                raise ValueError("knot locations must lie in (0, 1]")
            steps = np.diff(knots)
            if np.any(steps <= 0.0):
                i = int(np.argmax(steps <= 0.0))
                raise ValueError(
                    f"knot locations must be strictly increasing: knots[{i}]={knots[i]!r}, "
                    f"knots[{i + 1}]={knots[i + 1]!r}"
                )
        if self.side not in ("right", "left"):
            raise ValueError("side must be 'right' or 'left'")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "value_at_0", float(self.value_at_0))

    # -- evaluation -------------------------------------------------------

    def _index(self, t: np.ndarray) -> np.ndarray:
        side = "right" if self.side == "right" else "left"
        return np.searchsorted(self.knots, t, side=side)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            raise ValueError("evaluation point outside [0, 1]")
        idx = self._index(t)
        table = np.concatenate([[self.value_at_0], self.values])
        out = table[idx]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        """Limit from the left; at t=0 the value at 0 is returned."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            raise ValueError("evaluation point outside [0, 1]")
        idx = np.searchsorted(self.knots, t, side="left")
        table = np.concatenate([[self.value_at_0], self.values])
        out = table[idx]
        return float(out) if out.ndim == 0 else out

    def right_limit(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right")
        table = np.concatenate([[self.value_at_0], self.values])
        out = table[idx]
        return float(out) if out.ndim == 0 else out

    # -- structure ------------------------------------------------------

    @property
    def breakpoints(self) -> np.ndarray:
        """Partition 0 = b_0 < ... < b_m = 1 on whose open cells f is constant."""
        inner = self.knots[self.knots < 1.0]
        return np.concatenate([[0.0], inner, [1.0]])

    @property
    def piece_values(self) -> np.ndarray:
        """Value on each open cell of :attr:`breakpoints`."""
        inner = self.values[self.knots < 1.0]
        return np.concatenate([[self.value_at_0], inner])

    @property
    def final_value(self) -> float:
        return float(self.values[-1]) if self.values.size else self.value_at_0

    def scaled(self, c: float) -> "StepFunction":
        return StepFunction(self.knots, c * self.values, c * self.value_at_0, self.side)

    def __neg__(self) -> "StepFunction":
        return self.scaled(-1.0)

    def refine(self, extra) -> "StepFunction":
        """Same function with additional (no-op) knots inserted."""
        extra = np.asarray(extra, dtype=float)
        knots = np.union1d(self.knots, extra[(extra > 0.0) & (extra <= 1.0)])
        # for either side the value attached to a knot is the one just to its right
        return StepFunction(knots, self.right_limit(knots), self.value_at_0, self.side)

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "value_at_0": self.value_at_0,
            "side": self.side,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(d["knots"], d["values"], d.get("value_at_0", 0.0), d.get("side", "right"))

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        w.writerow([repr(0.0), repr(self.value_at_0)])
        for t, v in zip(self.knots.tolist(), self.values.tolist()):
            w.writerow([repr(t), repr(v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: Union[str, Path], side: str = "right") -> "StepFunction":
        """Read the ``t,value`` format; ``source`` is a path or the CSV text."""
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"t", "value"}:
            raise ValueError("expected a CSV with header 't,value'")
        t = np.array([float(r["t"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        value_at_0 = 0.0
        if t.size and t[0] == 0.0:
            value_at_0, t, v = float(v[0]), t[1:], v[1:]
        return cls(t, v, value_at_0, side)


def make_step(pairs: Iterable[tuple[float, float]], value_at_0: float = 0.0) -> StepFunction:
    """Build a cadlag step function from ``(location, value)`` pairs.

    Locations must be strictly increasing in (0, 1]; ties are rejected, not
    merged.
    """
    pairs = list(pairs)
    if pairs:
        knots, values = zip(*pairs)
    else:
        knots, values = (), ()
    return StepFunction(np.asarray(knots, dtype=float), np.asarray(values, dtype=float), value_at_0)


def eval_upper(f: StepFunction, t):
    """Upper version of ``f``: max of the value and the left limit (f(0) at 0)."""
    return np.maximum(f(t), f.left_limit(t)) if np.ndim(t) else max(f(t), f.left_limit(t))


def eval_lower(f: StepFunction, t):
    """Lower version of ``f``: min of the value and the left limit."""
    return np.minimum(f(t), f.left_limit(t)) if np.ndim(t) else min(f(t), f.left_limit(t))


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous piecewise-affine function given by its vertices."""

    x: np.ndarray
    y: np.ndarray
    kind: str = "concave"

    def __post_init__(self):
        x = _frozen(self.x).reshape(-1)
        y = _frozen(self.y).reshape(-1)
        if x.shape != y.shape or x.size < 2:
            raise ValueError("need at least two vertices with matching x and y")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("vertex abscissae must be strictly increasing")
        if self.kind not in ("concave", "convex", "none"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.y) / np.diff(self.x)

    @property
    def vertices(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __call__(self, t):
        out = np.interp(t, self.x, self.y)
        return float(out) if np.ndim(out) == 0 else out

    def shape_ok(self) -> bool:
        s = self.slopes
        if self.kind == "concave":
            return bool(np.all(np.diff(s) < 0))
        if self.kind == "convex":
            return bool(np.all(np.diff(s) > 0))
        return True

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "kind": self.kind}


# -- L_p distances ----------------------------------------------------------

Target = Union[Callable, float, StepFunction]


def _affine_parts(g):
    aff = getattr(g, "affine", None)
    if aff is None:
        return None
    return float(aff[0]), float(aff[1])


def _abs_power_antiderivative(u: np.ndarray, p: float) -> np.ndarray:
    return np.sign(u) * np.abs(u) ** (p + 1.0) / (p + 1.0)


def _lp_affine(lo, hi, c, intercept, slope, p):
    # d(t) = c - (intercept + slope*t) is affine on each piece
    width = hi - lo
    d_lo = c - intercept - slope * lo
    d_hi = c - intercept - slope * hi
    if p == 2.0:
        return width * (d_lo**2 + d_lo * d_hi + d_hi**2) / 3.0
    if p == 1.0:
        crosses = d_lo * d_hi < 0.0
        denom = np.where(crosses, np.abs(d_lo) + np.abs(d_hi), 1.0)
        return np.where(crosses, width * (d_lo**2 + d_hi**2) / (2.0 * denom), width * np.abs(d_lo + d_hi) / 2.0)
    d_mid = 0.5 * (d_lo + d_hi)
    delta = d_hi - d_lo
    flat = np.abs(delta) <= 1e-6 * np.abs(d_mid)
    exact = width * (_abs_power_antiderivative(d_hi, p) - _abs_power_antiderivative(d_lo, p)) / np.where(flat, 1.0, delta)
    # midpoint rule plus its second-order correction for nearly flat pieces
    rel = np.where(d_mid == 0.0, 0.0, delta / np.where(d_mid == 0.0, 1.0, d_mid))
    approx = np.abs(d_mid) ** p * width * (1.0 + p * (p - 1.0) * rel**2 / 24.0)
    return np.where(flat, approx, exact)


def _split_at_crossings(g, lo, hi, c, iters=60):
    """Cut each piece where ``g`` crosses the piece value (bisection)."""
    d_lo = c - np.asarray(g(lo), dtype=float)
    d_hi = c - np.asarray(g(hi), dtype=float)
    cross = d_lo * d_hi < 0.0
    idx = np.arange(lo.size)
    if not cross.any():
        return lo, hi, idx
    a, b = lo[cross], hi[cross]
    sign_a = np.sign(d_lo[cross])
    cc = c[cross]
    for _ in range(iters):
        m = 0.5 * (a + b)
        same = np.sign(cc - np.asarray(g(m), dtype=float)) == sign_a
        a = np.where(same, m, a)
        b = np.where(same, b, m)
    root = 0.5 * (a + b)
    first_hi = hi.copy()
    first_hi[cross] = root
    return (
        np.concatenate([lo, root]),
        np.concatenate([first_hi, hi[cross]]),
        np.concatenate([idx, idx[cross]]),
    )


def lp_distance(
    f: StepFunction,
    g: Target,
    p: float = 1.0,
    quad: QuadSettings = DEFAULT_QUAD,
) -> float:
    """Compute ``int_0^1 |f(t) - g(t)|^p dt`` piece by piece over f's knots.

    ``g`` may be a scalar, a step function, a vectorised callable, or an
    object exposing ``affine = (intercept, slope)``. Step and affine targets
    are integrated in closed form; other callables go through adaptive
    Gauss-Legendre quadrature after splitting every piece at the point where
    ``g`` crosses the value of ``f``.
    """
    if p < 1.0:
        raise ValueError("p must be >= 1")
    if isinstance(g, StepFunction):
        edges = np.union1d(f.breakpoints, g.breakpoints)
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)
        return float(np.sum(np.abs(f(mid) - g(mid)) ** p * (hi - lo)))
    edges = f.breakpoints
    lo, hi = edges[:-1], edges[1:]
    c = f.piece_values
    if np.isscalar(g):
        return float(np.sum(np.abs(c - float(g)) ** p * (hi - lo)))
    aff = _affine_parts(g)
    if aff is not None:
        return float(np.sum(_lp_affine(lo, hi, c, aff[0], aff[1], p)))

    lo2, hi2, tags = _split_at_crossings(g, lo, hi, c)

    def integrand(t, tag):
        return np.abs(c[tag] - g(t)) ** p

    return integrate_pieces(integrand, lo2, hi2, tags, quad)
