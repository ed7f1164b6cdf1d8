"""Argmax of two-sided Brownian motion with parabolic drift.

``X(a)`` is the location of the maximum of ``u -> -(u - a)**2 + W(u)``. The
process is simulated on a regular grid; for each path the concave majorant
of ``W(u) - u**2`` is built once and ``X(a)`` for every ``a`` on a grid is
read off its vertices.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._kernels import drifted_argmax

__all__ = [
    "BrownianPath",
    "ChernoffEstimate",
    "WindowError",
    "simulate_path",
    "argmax_drifted",
    "sample_argmax",
    "estimate_constants",
    "cached_constants",
]

BOUNDARY_RATE_LIMIT = 1e-3


class WindowError(RuntimeError):
    """Too many maximisers landed on the edge of the simulation window."""


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Two-sided Brownian motion on the grid ``u = k*h``, ``-left <= u <= right``."""

    h: float
    left: float
    right: float
    values: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        nl = int(round(self.left / self.h))
        return np.arange(-nl, self.values.size - nl) * self.h

    def shifted(self, k: int) -> "BrownianPath":
        """Path ``u -> W(u - k*h)`` re-anchored to vanish at 0 (k >= 0).

        The grid keeps its extent, so the rightmost ``k`` increments are lost
        and ``k`` fresh zero-variance points are padded at the left edge.
        """
        v = np.concatenate([np.full(k, self.values[0]), self.values[: self.values.size - k]])
        nl = int(round(self.left / self.h))
        return BrownianPath(self.h, self.left, self.right, v - v[nl])


def _grid_sizes(left: float, right: float, h: float) -> tuple[int, int]:
    return int(round(left / h)), int(round(right / h))


def _brownian_rows(rng: np.random.Generator, rows: int, nl: int, nr: int, h: float) -> np.ndarray:
    sd = np.sqrt(h)
    out = np.empty((rows, nl + nr + 1))
    out[:, nl] = 0.0
    if nr:
        np.cumsum(rng.standard_normal((rows, nr)) * sd, axis=1, out=out[:, nl + 1 :])
    if nl:
        out[:, :nl] = np.cumsum(rng.standard_normal((rows, nl)) * sd, axis=1)[:, ::-1]
    return out


def simulate_path(T: float, h: float, rng: np.random.Generator, extra: float = 0.0) -> BrownianPath:
    """Simulate W on ``[-T, T + extra]`` with step ``h`` and W(0) = 0."""
    if T <= 0 or not 0 < h <= T:
        raise ValueError("need T > 0 and 0 < h <= T")
    nl, nr = _grid_sizes(T, T + extra, h)
    return BrownianPath(h, nl * h, nr * h, _brownian_rows(rng, 1, nl, nr, h)[0])


class Argmax(NamedTuple):
    location: float
    at_boundary: bool


def argmax_drifted(path: BrownianPath, a: float, curvature: float = 1.0) -> Argmax:
    """Greatest grid maximiser of ``-curvature*(u - a)**2 + W(u)`` by direct scan."""
    u = path.grid
    obj = -curvature * (u - a) ** 2 + path.values
    i = obj.size - 1 - int(np.argmax(obj[::-1]))
    return Argmax(float(u[i]), bool(i <= 1 or i >= obj.size - 2))


def sample_argmax(
    reps: int,
    a_values,
    T: float = 6.0,
    h: float = 2e-3,
    seed=0,
    curvature: float = 1.0,
    chunk: int = 256,
) -> tuple[np.ndarray, float]:
    """``X(a)`` for every ``a`` in ``a_values`` on ``reps`` independent paths.

    Returns the (reps, len(a_values)) array and the fraction of maximisers
    within one step of the window edge.
    """
    a_values = np.asarray(a_values, dtype=float)
    order = np.argsort(a_values)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    extra = max(0.0, float(a_values.max()))
    left = T + max(0.0, -float(a_values.min()))
    nl, nr = _grid_sizes(left, T + extra, h)
    u = np.arange(-nl, nr + 1) * h
    drifts = 2.0 * curvature * a_values[order]
    out = np.empty((reps, a_values.size))
    edge = 0
    for s in range(0, reps, chunk):
        rows = min(chunk, reps - s)
        W = _brownian_rows(rng, rows, nl, nr, h)
        idx = drifted_argmax(W, u, curvature, drifts)
        edge += int(np.count_nonzero((idx <= 1) | (idx >= u.size - 2)))
        out[s : s + rows, order] = u[idx]
    return out, edge / out.size


@dataclass
class ChernoffEstimate:
    """Monte Carlo estimates of E|X(0)|^p and of the covariance integral k_p."""

    p: float
    moment_p: float
    moment_se: float
    k_p: float
    k_p_se: float
    mean_x0: float
    mean_x0_se: float
    reps: int
    h: float
    T: float
    a_max: float
    a_step: float
    seed: int
    batches: int
    boundary_rate: float
    a_grid: list = field(default_factory=list)
    cov: list = field(default_factory=list)
    cov_se: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChernoffEstimate":
        return cls(**d)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path) -> "ChernoffEstimate":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def curve_csv(self, path=None) -> str:
        lines = ["a,cov,cov_se"]
        lines += [f"{a!r},{c!r},{s!r}" for a, c, s in zip(self.a_grid, self.cov, self.cov_se)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _batch_sums(args):
    ss, rows, p, a_grid, T, h = args
    X, edge = sample_argmax(rows, a_grid, T=T, h=h, seed=ss)
    A = np.abs(X[:, 0]) ** p
    B = np.abs(X - a_grid[None, :]) ** p
    return {
        "n": rows,
        "x0": float(X[:, 0].sum()),
        "x0sq": float((X[:, 0] ** 2).sum()),
        "A": float(A.sum()),
        "B": B.sum(axis=0),
        "AB": (A[:, None] * B).sum(axis=0),
        "edge": edge * X.size,
        "cells": X.size,
    }


def _cov(s) -> np.ndarray:
    n = s["n"]
    return s["AB"] / n - (s["A"] / n) * (s["B"] / n)


def estimate_constants(
    p: float,
    reps: int = 200_000,
    T: float = 6.0,
    h: float = 2e-3,
    a_max: float = 4.0,
    a_step: float = 0.1,
    seed: int = 0,
    batches: int = 100,
    threads: int = 1,
) -> ChernoffEstimate:
    """Estimate E|X(0)|^p and k_p = int_0^inf cov(|X(0)|^p, |X(a) - a|^p) da.

    All ``a`` on the grid share one Brownian path per replicate. The path is
    simulated on ``[-T, T + a_max]`` so every ``X(a)`` has a margin of ``T``
    on its right. Standard errors come from ``batches`` batch means, each
    batch driven by its own child of ``SeedSequence(seed)``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if a_max <= 0 or a_step <= 0:
        raise ValueError("a_max and a_step must be positive")
    if reps < 2 * batches:
        raise ValueError("need at least two replicates per batch")
    n_a = int(round(a_max / a_step))
    a_grid = np.arange(n_a + 1) * a_step
    sizes = np.full(batches, reps // batches)
    sizes[: reps % batches] += 1
    children = np.random.SeedSequence(seed).spawn(batches)
    jobs = [(children[b], int(sizes[b]), p, a_grid, T, h) for b in range(batches)]
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            sums = list(pool.map(_batch_sums, jobs))
    else:
        sums = [_batch_sums(j) for j in jobs]

    rate = sum(s["edge"] for s in sums) / sum(s["cells"] for s in sums)
    if rate > BOUNDARY_RATE_LIMIT:
        raise WindowError(f"{rate:.2%} of maximisers hit the window edge; increase T (now {T})")

    total = {k: sum(s[k] for s in sums) for k in ("n", "x0", "A", "B", "AB")}
    cov = _cov(total)
    k_p = float(np.trapezoid(cov, a_grid))
    batch_mom = np.array([s["A"] / s["n"] for s in sums])
    batch_x0 = np.array([s["x0"] / s["n"] for s in sums])
    batch_cov = np.array([_cov(s) for s in sums])
    batch_k = np.trapezoid(batch_cov, a_grid, axis=1)
    root = np.sqrt(batches)
    return ChernoffEstimate(
        p=float(p),
        moment_p=total["A"] / total["n"],
        moment_se=float(batch_mom.std(ddof=1) / root),
        k_p=k_p,
        k_p_se=float(batch_k.std(ddof=1) / root),
        mean_x0=total["x0"] / total["n"],
        mean_x0_se=float(batch_x0.std(ddof=1) / root),
        reps=int(reps),
        h=float(h),
        T=float(T),
        a_max=float(a_max),
        a_step=float(a_step),
        seed=int(seed),
        batches=int(batches),
        boundary_rate=float(rate),
        a_grid=a_grid.tolist(),
        cov=cov.tolist(),
        cov_se=(batch_cov.std(axis=0, ddof=1) / root).tolist(),
    )


def default_cache_dir() -> Path:
    return Path(os.environ.get("MONOSLOPE_CACHE", Path.home() / ".cache" / "monoslope"))


def cache_path(cache_dir, p, T, h, a_max, a_step, reps, seed) -> Path:
    name = f"chernoff_p{p!r}_T{T!r}_h{h!r}_amax{a_max!r}_astep{a_step!r}_reps{reps}_seed{seed}.json"
    return Path(cache_dir) / name


def cached_constants(
    p: float,
    reps: int = 200_000,
    T: float = 6.0,
    h: float = 2e-3,
    a_max: float = 4.0,
    a_step: float = 0.1,
    seed: int = 0,
    cache_dir=None,
    threads: int = 1,
    compute: bool = True,
) -> ChernoffEstimate:
    """Load an estimate from the cache, computing and storing it if absent.

    With ``compute=False`` a missing entry raises ``FileNotFoundError``.
    """
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache_path(cache_dir, float(p), float(T), float(h), float(a_max), float(a_step), reps, seed)
    if path.exists():
        return ChernoffEstimate.from_json(path)
    if not compute:
        raise FileNotFoundError(
            f"no cached Chernoff estimate at {path}; run `monoslope chernoff --p {p} --reps {reps} "
            f"--seed {seed}` first"
        )
    est = estimate_constants(p, reps, T, h, a_max, a_step, seed, threads=threads)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    est.to_json(tmp)
    tmp.replace(path)
    return est
