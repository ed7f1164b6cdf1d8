"""The four application models: samplers, primitive estimators and the
time change of their Gaussian approximation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .estimator import Direction
from .functions import Linear, MonotoneFunction, function_from_dict
from .stepfn import StepFunction

__all__ = [
    "FAMILIES",
    "Censoring",
    "ModelSpec",
    "Dataset",
    "sample",
    "build_lambda_n",
    "model_L",
]

FAMILIES = ("censorship", "poisson", "regression", "density")


@dataclass(frozen=True)
class Censoring:
    """Distribution of the censoring times.

    ``fixed``: Y = param (point mass); ``uniform``: Y ~ U(0, param);
    ``exponential``: Y ~ Exp(rate=param).
    """

    kind: str = "fixed"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "exponential"):
            raise ValueError(f"unknown censoring kind {self.kind!r}")
        if self.param <= 0:
            raise ValueError("censoring parameter must be positive")

    def cdf(self, t):
        """Left-continuous version G(t-) (only differs for a point mass)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "fixed":
            return (t > self.param).astype(float)
        if self.kind == "uniform":
            return np.clip(t / self.param, 0.0, 1.0)
        return -np.expm1(-self.param * np.maximum(t, 0.0))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "fixed":
            return np.zeros_like(t)
        if self.kind == "uniform":
            return np.where((t >= 0) & (t <= self.param), 1.0 / self.param, 0.0)
        return self.param * np.exp(-self.param * np.maximum(t, 0.0))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.param)
        if self.kind == "uniform":
            return rng.uniform(0.0, self.param, n)
        return rng.exponential(1.0 / self.param, n)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}


_NOISE: dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {
    "gaussian": lambda rng, n: rng.standard_normal(n),
    "uniform": lambda rng, n: rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n),
    "rademacher": lambda rng, n: rng.choice(np.array([-1.0, 1.0]), n),
}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One model family together with the true function and nuisances.

    ``lam`` is the estimand (failure rate, intensity, regression mean or
    density). ``variance`` is the noise variance function sigma^2 for the
    regression family; ``noise`` names a standardised noise law or is a
    callable ``(rng, n) -> draws`` with mean 0 and variance 1.
    """

    family: str
    lam: MonotoneFunction
    direction: Direction | None = None
    censoring: Censoring | None = None
    variance: MonotoneFunction | None = None
    noise: str | Callable = "gaussian"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.direction is None:
            d0 = float(np.asarray(self.lam.derivative(0.5)))
            object.__setattr__(
                self, "direction", Direction.NONINCREASING if d0 < 0 else Direction.NONDECREASING
            )
        else:
            object.__setattr__(self, "direction", Direction(self.direction))
        if self.family == "censorship" and self.censoring is None:
            object.__setattr__(self, "censoring", Censoring())
        if self.family == "regression" and self.variance is None:
            object.__setattr__(self, "variance", Linear(1.0, 0.0))
        if isinstance(self.noise, str) and self.noise not in _NOISE:
            raise ValueError(f"unknown noise law {self.noise!r}")
        if self.validate:
            self.check()

    def check(self, grid: int = 1001) -> None:
        """Verify the standing assumptions on a grid; raise ValueError if not."""
        t = np.linspace(0.0, 1.0, grid)
        d = np.asarray(self.lam.derivative(t), dtype=float)
        want = self.direction.sign
        if not np.all(d * want > 0):
            raise ValueError("lam' must be bounded away from 0 with the sign of the declared direction")
        vals = np.asarray(self.lam(t), dtype=float)
        if self.family in ("density", "poisson", "censorship") and not np.all(vals > 0):
            raise ValueError(f"{self.family} family needs inf lam > 0")
        if self.family == "density":
            total = float(self.lam.cumulative(1.0))
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"density must integrate to 1 on [0, 1], got {total!r}")
        if self.family == "censorship":
            if float(self.censoring.cdf(1.0)) >= 1.0:
                raise ValueError("censoring distribution must satisfy G(1-) < 1")
        if self.family == "regression":
            s2 = np.asarray(self.variance(t), dtype=float)
            if not np.all(s2 > 0):
                raise ValueError("variance function must be positive")

    def noise_sampler(self):
        return _NOISE[self.noise] if isinstance(self.noise, str) else self.noise

    def to_dict(self) -> dict:
        d = {"family": self.family, "lam": self.lam.to_dict(), "direction": self.direction.value}
        if self.family == "censorship":
            d["censoring"] = self.censoring.to_dict()
        if self.family == "regression":
            d["variance"] = self.variance.to_dict()
            if not isinstance(self.noise, str):
                raise TypeError("custom noise samplers are not serialisable")
            d["noise"] = self.noise
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        cens = d.get("censoring")
        var = d.get("variance")
        return cls(
            family=d["family"],
            lam=function_from_dict(d["lam"]),
            direction=d.get("direction"),
            censoring=Censoring(cens["kind"], float(cens["param"])) if cens else None,
            variance=function_from_dict(var) if var else None,
            noise=d.get("noise", "gaussian"),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Raw observations of one model.

    censorship: ``x`` and ``delta``; poisson: ``times`` and ``process_ids``
    (``n`` processes); regression: ``y`` observed at i/n; density: ``x``.
    """

    family: str
    n: int
    x: np.ndarray | None = None
    delta: np.ndarray | None = None
    y: np.ndarray | None = None
    times: np.ndarray | None = None
    process_ids: np.ndarray | None = None

    def __post_init__(self):
        f = self.family
        if f == "censorship":
            if self.x is None or self.delta is None or len(self.x) != self.n or len(self.delta) != self.n:
                raise ValueError("censorship data needs n pairs (x, delta)")
            if not np.all(np.isin(self.delta, (0, 1))):
                raise ValueError("delta must be 0 or 1")
        elif f == "density":
            if self.x is None or len(self.x) != self.n:
                raise ValueError("density data needs n observations")
        elif f == "regression":
            if self.y is None or len(self.y) != self.n:
                raise ValueError("regression data needs n responses")
        elif f == "poisson":
            if self.times is None or self.process_ids is None or len(self.times) != len(self.process_ids):
                raise ValueError("poisson data needs event times and process ids")
            if len(self.process_ids) and (self.process_ids.min() < 0 or self.process_ids.max() >= self.n):
                raise ValueError("process ids must lie in 0..n-1")
        else:
            raise ValueError(f"unknown family {f!r}")

    _HEADERS = {
        "censorship": ("x", "delta"),
        "regression": ("i", "y"),
        "density": ("x",),
        "poisson": ("process_id", "event_time"),
    }

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self._HEADERS[self.family])
        if self.family == "censorship":
            for a, b in zip(self.x.tolist(), self.delta.tolist()):
                w.writerow([repr(a), int(b)])
        elif self.family == "regression":
            for i, v in enumerate(self.y.tolist(), start=1):
                w.writerow([i, repr(v)])
        elif self.family == "density":
            for a in self.x.tolist():
                w.writerow([repr(a)])
        else:
            for pid, t in zip(self.process_ids.tolist(), self.times.tolist()):
                w.writerow([int(pid), repr(t)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, family: str, source, n: int | None = None) -> "Dataset":
        """Read the per-family CSV. For poisson, ``n`` (number of processes)
        defaults to one more than the largest process id."""
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = tuple(rows[0]), rows[1:]
        if header != cls._HEADERS[family]:
            raise ValueError(f"expected header {','.join(cls._HEADERS[family])}, got {','.join(header)}")
        cols = list(zip(*body)) if body else [()] * len(header)
        if family == "censorship":
            x = np.array(cols[0], dtype=float)
            return cls(family, x.size, x=x, delta=np.array(cols[1], dtype=np.int64))
        if family == "regression":
            idx = np.array(cols[0], dtype=np.int64)
            if not np.array_equal(idx, np.arange(1, idx.size + 1)):
                raise ValueError("regression rows must be indexed 1..n in order")
            y = np.array(cols[1], dtype=float)
            return cls(family, y.size, y=y)
        if family == "density":
            x = np.array(cols[0], dtype=float)
            return cls(family, x.size, x=x)
        pid = np.array(cols[0], dtype=np.int64)
        times = np.array(cols[1], dtype=float)
        if n is None:
            n = int(pid.max()) + 1 if pid.size else 1
        return cls(family, n, times=times, process_ids=pid)


# -- sampling ---------------------------------------------------------------


def _failure_times(lam: MonotoneFunction, rng: np.random.Generator, n: int) -> np.ndarray:
    # F = 1 - exp(-Lambda_ext) with the hazard held at lam(1) beyond t = 1
    e = rng.standard_exponential(n)
    big = float(lam.cumulative(1.0))
    inside = e <= big
    t = np.empty(n)
    t[inside] = lam.inverse_cumulative(e[inside])
    t[~inside] = 1.0 + (e[~inside] - big) / float(lam(1.0))
    return t


def sample(spec: ModelSpec, n: int, rng: np.random.Generator) -> Dataset:
    """Draw one dataset of size ``n`` from ``spec``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = spec.lam
    if spec.family == "density":
        x = lam.inverse_cumulative(rng.uniform(0.0, 1.0, n))
        return Dataset("density", n, x=np.clip(x, 0.0, 1.0))
    if spec.family == "censorship":
        t = _failure_times(lam, rng, n)
        y = spec.censoring.sample(rng, n)
        return Dataset("censorship", n, x=np.minimum(t, y), delta=(t <= y).astype(np.int64))
    if spec.family == "regression":
        grid = np.arange(1, n + 1) / n
        eps = np.sqrt(spec.variance(grid)) * spec.noise_sampler()(rng, n)
        return Dataset("regression", n, y=lam(grid) + eps)
    # poisson: unit-rate arrivals on [0, Lambda(1)] mapped back through Lambda^{-1};
    # given its count, each process's arrivals are sorted uniforms
    total = float(lam.cumulative(1.0))
    counts = rng.poisson(total, n)
    pid = np.repeat(np.arange(n), counts)
    arrivals = rng.uniform(0.0, total, pid.size)
    order = np.lexsort((arrivals, pid))
    arrivals = arrivals[order]
    times = np.clip(lam.inverse_cumulative(arrivals), 0.0, 1.0)
    return Dataset("poisson", n, times=times, process_ids=pid)


# -- primitive estimators -----------------------------------------------------


def _counting_step(locations: np.ndarray, weights: np.ndarray) -> StepFunction:
    """Cadlag step with jumps ``weights`` at ``locations`` (ties summed)."""
    locations = np.asarray(locations, dtype=float)
    at0 = float(weights[locations <= 0.0].sum())
    keep = (locations > 0.0) & (locations <= 1.0)
    loc, w = locations[keep], weights[keep]
    order = np.argsort(loc, kind="stable")
    loc, w = loc[order], w[order]
    uniq, start = np.unique(loc, return_index=True)
    csum = at0 + np.cumsum(w)
    if uniq.size:
        ends = np.append(start[1:], loc.size) - 1
        values = csum[ends]
    else:
        values = np.empty(0)
    return StepFunction(uniq, values, at0)


def build_lambda_n(spec: ModelSpec, data: Dataset) -> StepFunction:
    """Step estimator of the primitive of ``spec.lam`` on [0, 1]."""
    if data.family != spec.family:
        raise ValueError(f"dataset is {data.family!r} but spec is {spec.family!r}")
    n = data.n
    if data.family == "density":
        return _counting_step(data.x, np.full(n, 1.0 / n))
    if data.family == "poisson":
        return _counting_step(data.times, np.full(data.times.size, 1.0 / n))
    if data.family == "regression":
        knots = np.arange(1, n + 1) / n
        return StepFunction(knots, np.cumsum(data.y) / n, 0.0)
    # Nelson-Aalen; tied observations are processed in sorted order (events
    # before censorings) and each one removes itself from the risk set
    x = np.asarray(data.x, dtype=float)
    delta = np.asarray(data.delta)
    order = np.lexsort((1 - delta, x))
    x, delta = x[order], delta[order]
    at_risk = n - np.arange(n)
    ev = delta == 1
    return _counting_step(x[ev], 1.0 / at_risk[ev])


# -- time change --------------------------------------------------------------


def _primitive(fn: Callable, t, order: int = 64):
    t = np.asarray(t, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    out = t * (np.asarray(fn(t[..., None] * nodes)) @ (0.5 * weights))
    return float(out) if out.ndim == 0 else out


def model_L(spec: ModelSpec) -> tuple[Callable, Callable]:
    """Time change L of the Gaussian approximation and its derivative."""
    lam = spec.lam
    if spec.family in ("density", "poisson"):
        return lam.cumulative, lam
    if spec.family == "regression":
        return spec.variance.cumulative, spec.variance

    cens = spec.censoring

    def l_prime(t):
        t = np.asarray(t, dtype=float)
        # (1 - F) = exp(-Lambda)
        return lam(t) * np.exp(lam.cumulative(t)) / (1.0 - cens.cdf(t))

    def big_l(t):
        return _primitive(l_prime, t)

    return big_l, l_prime
