"""Monotone estimators defined as slopes of concave/convex envelopes."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._kernels import upper_hull
from .stepfn import PiecewiseLinear, StepFunction, eval_lower, eval_upper

__all__ = [
    "Direction",
    "MonotoneEstimate",
    "concave_majorant",
    "convex_minorant",
    "monotone_estimate",
    "monotone_estimate_csd",
    "inverse_process",
]


class Direction(str, Enum):
    NONINCREASING = "nonincreasing"
    NONDECREASING = "nondecreasing"

    @property
    def sign(self) -> int:
        return -1 if self is Direction.NONINCREASING else 1


def _as_xy(points, y=None):
    if y is not None:
        x = np.asarray(points, dtype=float)
        y = np.asarray(y, dtype=float)
    else:
        arr = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = arr[:, 0].copy(), arr[:, 1].copy()
    if x.size < 2:
        raise ValueError("an envelope needs at least 2 points")
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("x must be strictly increasing")
    return np.ascontiguousarray(x), np.ascontiguousarray(y)


def concave_majorant(points, y=None) -> PiecewiseLinear:
    """Least concave majorant of a point set with increasing abscissae.

    ``points`` is either a sequence of ``(x, y)`` pairs or, when ``y`` is
    given, the array of abscissae. The retained vertices are a subsequence
    of the input and collinear runs are merged into one segment.
    """
    x, yy = _as_xy(points, y)
    idx = upper_hull(x, yy)
    return PiecewiseLinear(x[idx], yy[idx], kind="concave")


def convex_minorant(points, y=None) -> PiecewiseLinear:
    """Greatest convex minorant, obtained by reflecting the majorant."""
    x, yy = _as_xy(points, y)
    idx = upper_hull(x, -yy)
    return PiecewiseLinear(x[idx], yy[idx], kind="convex")


@dataclass(frozen=True, eq=False)
class MonotoneEstimate:
    """Left slope of an envelope of a step process.

    ``estimate`` is left-continuous with ``estimate(0)`` equal to the slope of
    the first envelope segment.
    """

    estimate: StepFunction
    envelope: PiecewiseLinear
    direction: Direction
    variant: str = "hat"

    def __call__(self, t):
        return self.estimate(t)

    @property
    def slopes(self) -> np.ndarray:
        return self.envelope.slopes

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "variant": self.variant,
            "vertices": {"x": self.envelope.x.tolist(), "y": self.envelope.y.tolist()},
            "slopes": self.slopes.tolist(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path=None) -> str:
        """One row per envelope segment: its right end ``t`` and its slope."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "slope"])
        for t, s in zip(self.envelope.x[1:].tolist(), self.slopes.tolist()):
            w.writerow([repr(t), repr(s)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "MonotoneEstimate":
        direction = Direction(d["direction"])
        kind = "concave" if direction is Direction.NONINCREASING else "convex"
        env = PiecewiseLinear(d["vertices"]["x"], d["vertices"]["y"], kind=kind)
        return cls(_slope_step(env), env, direction, d.get("variant", "hat"))


def _slope_step(env: PiecewiseLinear) -> StepFunction:
    s = env.slopes
    return StepFunction(env.x[1:-1], s[1:], s[0], side="left")


def _diagram_abscissae(lam_n: StepFunction) -> np.ndarray:
    return np.unique(np.concatenate([[0.0], lam_n.knots, [1.0]]))


def _build(x, y, direction: Direction, variant: str) -> MonotoneEstimate:
    direction = Direction(direction)
    if direction is Direction.NONINCREASING:
        env = concave_majorant(x, y)
    else:
        env = convex_minorant(x, y)
    return MonotoneEstimate(_slope_step(env), env, direction, variant)


def monotone_estimate(lam_n: StepFunction, direction=Direction.NONINCREASING) -> MonotoneEstimate:
    """Monotone estimator from the envelope of the whole cadlag graph.

    For a nonincreasing target the least concave majorant is taken over the
    upper version of ``lam_n`` (value or left limit, whichever is larger, at
    every knot); for a nondecreasing target the greatest convex minorant is
    taken over the lower version.
    """
    direction = Direction(direction)
    x = _diagram_abscissae(lam_n)
    y = eval_upper(lam_n, x) if direction is Direction.NONINCREASING else eval_lower(lam_n, x)
    return _build(x, y, direction, "hat")


def monotone_estimate_csd(lam_n: StepFunction, direction=Direction.NONINCREASING) -> MonotoneEstimate:
    """Variant built on the cumulative sum diagram only.

    The envelope runs over ``(t, lam_n(t))`` for t in {0, 1} and the knots of
    ``lam_n``; left limits are ignored. For a regression ``lam_n`` this is the
    least-squares (Brunk) estimator.
    """
    direction = Direction(direction)
    x = _diagram_abscissae(lam_n)
    return _build(x, lam_n(x), direction, "tilde")


def inverse_process(lam_n: StepFunction, a, direction=Direction.NONINCREASING):
    """Greatest maximiser over [0, 1] of ``u -> lam_n^+(u) - a*u``.

    For a nondecreasing target the process is reflected: the greatest
    minimiser of ``lam_n^-(u) - a*u`` is returned. Because ``lam_n`` is a step
    function the optimum is always attained at 0, 1 or a knot.
    """
    direction = Direction(direction)
    x = _diagram_abscissae(lam_n)
    if direction is Direction.NONINCREASING:
        y = eval_upper(lam_n, x)
        sign = 1.0
    else:
        y = -eval_lower(lam_n, x)
        sign = -1.0
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.empty(a_arr.size)
    chunk = max(1, 2_000_000 // x.size)
    for s in range(0, a_arr.size, chunk):
        aa = sign * a_arr[s : s + chunk]
        obj = y[None, :] - aa[:, None] * x[None, :]
        # greatest location of the maximum
        rev = np.argmax(obj[:, ::-1], axis=1)
        out[s : s + chunk] = x[x.size - 1 - rev]
    return float(out[0]) if np.ndim(a) == 0 else out
