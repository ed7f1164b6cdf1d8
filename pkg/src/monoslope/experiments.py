"""Monte Carlo experiments: risk rates, boundary behaviour, the CLT of the
L_p-error and the modulus condition on the centred primitive estimator.

Every replicate draws from its own stream, seeded by hashing
``(master seed, family, n, replicate)``, so results do not depend on how
replicates are distributed over workers. Rows are sorted before they are
returned and floats are written with ``repr``, which makes the CSV output
byte-identical between serial and parallel runs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .asymptotics import LimitConstants, limit_constants, normalized_statistic
from .chernoff import ChernoffEstimate
from .estimator import monotone_estimate, monotone_estimate_csd
from .functions import Linear
from .models import ModelSpec, build_lambda_n, sample
from .stepfn import lp_distance

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "replicate_seed",
    "run_risk",
    "run_boundary",
    "run_clt",
    "modulus_diagnostic",
    "loglog_slope",
    "trend_test",
    "summarize",
]

COLUMNS = ("n", "replicate", "seed", "kind", "t", "p", "value")
P_RISK_MAX = 2.0
P_CLT_MAX = 2.5


def default_model(family: str) -> dict:
    lam = Linear(1.5, -1.0).to_dict()
    if family == "regression":
        return {"family": family, "lam": lam, "variance": Linear(0.09, 0.0).to_dict(), "noise": "gaussian"}
    if family == "censorship":
        return {"family": family, "lam": lam, "censoring": {"kind": "uniform", "param": 2.0}}
    return {"family": family, "lam": lam}


@dataclass
class ExperimentConfig:
    family: str = "density"
    model: dict | None = None
    p: tuple = (1.0,)
    n_grid: tuple = (1000, 2000, 4000, 8000, 16000, 32000)
    replicates: int = 500
    seed: int = 0
    points: tuple = (0.5,)
    variant: str = "hat"
    threads: int = 1
    boundary_c: float = 0.5
    x_grid: tuple = (0.1, 0.2, 0.4, 0.8)
    t_grid: tuple = tuple(np.round(np.linspace(0.0, 1.0, 11), 10).tolist())
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.p, (int, float)):
            self.p = (float(self.p),)
        self.p = tuple(float(x) for x in self.p)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.points = tuple(float(t) for t in self.points)
        self.x_grid = tuple(float(x) for x in self.x_grid)
        self.t_grid = tuple(float(t) for t in self.t_grid)
        if self.model is None:
            self.model = default_model(self.family)
        if self.model.get("family", self.family) != self.family:
            raise ValueError("model family does not match config family")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        if self.variant not in ("hat", "tilde"):
            raise ValueError("variant must be 'hat' or 'tilde'")

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec.from_dict({**self.model, "family": self.family})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ExperimentResult:
    name: str
    rows: list
    summary: dict = field(default_factory=dict)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r["n"], r["replicate"], r["seed"], r["kind"], repr(r["t"]), repr(r["p"]), repr(r["value"])])
        return buf.getvalue()

    def save(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows_path = out / f"{self.name}_rows.csv"
        summary_path = out / f"{self.name}_summary.json"
        rows_path.write_text(self.rows_csv())
        summary_path.write_text(json.dumps(self.summary, indent=2, default=float))
        return rows_path, summary_path


def read_rows(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(
                {
                    "n": int(r["n"]),
                    "replicate": int(r["replicate"]),
                    "seed": int(r["seed"]),
                    "kind": r["kind"],
                    "t": float(r["t"]),
                    "p": float(r["p"]),
                    "value": float(r["value"]),
                }
            )
    return rows


def replicate_seed(master: int, family: str, n: int, replicate: int) -> int:
    """128-bit seed = leading bytes of sha256("master:family:n:replicate")."""
    digest = hashlib.sha256(f"{master}:{family}:{n}:{replicate}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


# -- statistics helpers -----------------------------------------------------


def loglog_slope(n, values) -> tuple[float, float]:
    """OLS slope of log(values) on log(n) and its residual standard error."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def trend_test(n, ratios) -> dict:
    """One-sided Spearman test for an upward trend of ``ratios`` in ``n``."""
    res = stats.spearmanr(n, ratios, alternative="greater")
    rho = float(res.statistic)
    pval = float(res.pvalue)
    return {"rho": rho, "p_value": pval, "upward_trend": bool(pval < 0.05), "max_ratio": float(np.max(ratios))}


def _ks_normal(x) -> dict:
    x = np.asarray(x, dtype=float)
    res = stats.kstest(x, "norm")
    return {
        "mean": float(x.mean()),
        "variance": float(x.var(ddof=1)),
        "skewness": float(stats.skew(x)),
        "ks_distance": float(res.statistic),
        "ks_p_value": float(res.pvalue),
        "ks_crit_1pct": float(stats.kstwo.ppf(0.99, x.size)),
        "count": int(x.size),
    }


# -- execution ----------------------------------------------------------------


def _run_jobs(func, jobs, threads: int) -> list:
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            chunks = list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (8 * threads))))
    else:
        chunks = [func(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["n"], r["replicate"], r["kind"], r["t"], r["p"]))
    return rows


def _estimate(spec: ModelSpec, n: int, seed: int, variant: str):
    rng = np.random.default_rng(seed)
    data = sample(spec, n, rng)
    lam_n = build_lambda_n(spec, data)
    build = monotone_estimate if variant == "hat" else monotone_estimate_csd
    return build(lam_n, spec.direction), lam_n


def _row(n, rep, seed, kind, t, p, value):
    return {"n": n, "replicate": rep, "seed": seed, "kind": kind, "t": float(t), "p": float(p), "value": float(value)}


def _risk_job(job):
    model, n, rep, seed, ps, points, variant = job
    spec = ModelSpec.from_dict(model)
    est, lam_n = _estimate(spec, n, seed, variant)
    rows = []
    pts = np.asarray(points, dtype=float)
    pts_eval = np.clip(pts, 0.0, 1.0)
    err = np.abs(est(pts_eval) - spec.lam(pts_eval))
    for p in ps:
        for t, e in zip(pts.tolist(), err.tolist()):
            rows.append(_row(n, rep, seed, "local", t, p, e**p))
        rows.append(_row(n, rep, seed, "global", -1.0, p, lp_distance(est.estimate, spec.lam, p)))
    if spec.family == "censorship" and lam_n.knots.size == 0:
        rows.append(_row(n, rep, seed, "degenerate", -1.0, 0.0, 1.0))
    return rows


def _check_p(ps, limit):
    for p in ps:
        if not 1.0 <= p < limit:
            raise ValueError(f"p={p!r} outside [1, {limit!r})")


def _group_means(rows, kind):
    out: dict = {}
    for r in rows:
        if r["kind"] != kind:
            continue
        out.setdefault((r["t"], r["p"]), {}).setdefault(r["n"], []).append(r["value"])
    return {k: {n: float(np.mean(v)) for n, v in sorted(d.items())} for k, d in out.items()}


def summarize_risk(rows) -> dict:
    summary = {"local": [], "global": [], "degenerate_replicates": sum(r["kind"] == "degenerate" for r in rows)}
    for kind in ("local", "global"):
        for (t, p), by_n in sorted(_group_means(rows, kind).items()):
            ns, risks = list(by_n), list(by_n.values())
            slope, se = loglog_slope(ns, risks)
            summary[kind].append({"t": t, "p": p, "n": ns, "risk": risks, "slope": slope, "slope_se": se, "target": -p / 3.0})
    return summary


def run_risk(config: ExperimentConfig) -> ExperimentResult:
    """Local risk at fixed points and global L_p risk over the n-grid."""
    _check_p(config.p, P_RISK_MAX)
    for n in config.n_grid:
        lo = n ** (-1.0 / 3.0) * (1.0 - 1e-12)
        if any(not lo <= t <= 1.0 - lo for t in config.points):
            raise ValueError(f"fixed points must lie in [n^-1/3, 1 - n^-1/3] for n={n}")
    model = {**config.model, "family": config.family}
    jobs = [
        (model, n, rep, replicate_seed(config.seed, config.family, n, rep), config.p, config.points, config.variant)
        for n in config.n_grid
        for rep in range(config.replicates)
    ]
    rows = _run_jobs(_risk_job, jobs, config.threads)
    return ExperimentResult("risk", rows, summarize_risk(rows))


def boundary_points(n: int, c: float) -> tuple[float, float]:
    t_n = c * n ** (-1.0 / 3.0)
    return t_n, 1.0 - t_n


def _boundary_job(job):
    model, n, rep, seed, ps, c, variant = job
    spec = ModelSpec.from_dict(model)
    est, _ = _estimate(spec, n, seed, variant)
    left, right = boundary_points(n, c)
    pts = np.array([left, right, 0.5])
    err = np.abs(est(pts) - spec.lam(pts))
    rows = []
    for p in ps:
        for kind, t, e in zip(("left", "right", "interior"), pts.tolist(), err.tolist()):
            rows.append(_row(n, rep, seed, kind, t, p, e**p))
    return rows


def summarize_boundary(rows, c: float) -> dict:
    summary = {}
    for kind in ("left", "right", "interior"):
        entries = []
        by = {}
        for r in rows:
            if r["kind"] == kind:
                by.setdefault(r["p"], {}).setdefault(r["n"], []).append(r["value"])
        for p, by_n in sorted(by.items()):
            ns = np.array(sorted(by_n), dtype=float)
            risk = np.array([np.mean(by_n[n]) for n in sorted(by_n)])
            if kind == "interior":
                ratio = risk * ns ** (p / 3.0)
            else:
                t_n = c * ns ** (-1.0 / 3.0)
                ratio = risk / (ns * t_n) ** (-p / 2.0)
            entry = {"p": p, "n": ns.astype(int).tolist(), "risk": risk.tolist(), "ratio": ratio.tolist()}
            entry.update(trend_test(ns, ratio))
            entries.append(entry)
        summary[kind] = entries
    return summary


def run_boundary(config: ExperimentConfig) -> ExperimentResult:
    """Local risk at ``t_n = c n^{-1/3}`` and ``1 - t_n`` against the boundary
    envelope ``(n t_n)^{-p/2}``, with t = 0.5 as interior control."""
    _check_p(config.p, P_RISK_MAX)
    model = {**config.model, "family": config.family}
    jobs = [
        (model, n, rep, replicate_seed(config.seed, config.family, n, rep), config.p, config.boundary_c, config.variant)
        for n in config.n_grid
        for rep in range(config.replicates)
    ]
    rows = _run_jobs(_boundary_job, jobs, config.threads)
    return ExperimentResult("boundary", rows, summarize_boundary(rows, config.boundary_c))


def _clt_job(job):
    model, n, rep, seed, constants, variant = job
    spec = ModelSpec.from_dict(model)
    est, lam_n = _estimate(spec, n, seed, variant)
    rows = []
    for c in constants:
        Jn = lp_distance(est.estimate, spec.lam, c.p)
        rows.append(_row(n, rep, seed, "error", -1.0, c.p, Jn))
        rows.append(_row(n, rep, seed, "statistic", -1.0, c.p, normalized_statistic(Jn, n, c)))
    return rows


def summarize_clt(rows) -> dict:
    out = []
    groups = {}
    for r in rows:
        if r["kind"] == "statistic":
            groups.setdefault((r["n"], r["p"]), []).append(r["value"])
    for (n, p), vals in sorted(groups.items()):
        entry = {"n": n, "p": p}
        entry.update(_ks_normal(vals))
        out.append(entry)
    return {"groups": out}


def run_clt(config: ExperimentConfig, chernoff) -> ExperimentResult:
    """Normalised L_p-error for every replicate and its distance to N(0, 1).

    ``chernoff`` maps each exponent p to a :class:`ChernoffEstimate` (a single
    estimate is accepted when ``config.p`` has one entry).
    """
    _check_p(config.p, P_CLT_MAX)
    if chernoff is None:
        raise FileNotFoundError("no Chernoff estimate available; run `monoslope chernoff --p <p>` first")
    if isinstance(chernoff, ChernoffEstimate):
        chernoff = {chernoff.p: chernoff}
    spec = config.spec
    constants = []
    for p in config.p:
        if p not in chernoff:
            raise FileNotFoundError(f"no Chernoff estimate for p={p}; run `monoslope chernoff --p {p}` first")
        constants.append(limit_constants(spec, p, chernoff[p]))
    model = {**config.model, "family": config.family}
    jobs = [
        (model, n, rep, replicate_seed(config.seed, config.family, n, rep), constants, config.variant)
        for n in config.n_grid
        for rep in range(config.replicates)
    ]
    rows = _run_jobs(_clt_job, jobs, config.threads)
    summary = summarize_clt(rows)
    summary["constants"] = [c.to_dict() for c in constants]
    return ExperimentResult("clt", rows, summary)


# -- modulus diagnostic -------------------------------------------------------


def _window_extremes(lam_n, big_lambda, lo: float, hi: float) -> tuple[float, float]:
    """sup and inf of M_n = lam_n - Lambda over [lo, hi] (Lambda monotone)."""
    k = lam_n.knots
    inside = k[(k > lo) & (k <= hi)]
    pts = np.concatenate([[lo, hi], inside])
    base = big_lambda(pts)
    vals = np.concatenate([lam_n(pts) - base, lam_n.left_limit(inside) - big_lambda(inside)])
    return float(vals.max()), float(vals.min())


def annulus_sup(lam_n, big_lambda, t: float, x: float) -> float:
    """``sup (M_n(u) - M_n(t))^2`` over ``u in [0,1]`` with ``x/2 <= |u - t| <= x``."""
    m_t = float(lam_n(t) - big_lambda(t))
    best = 0.0
    for lo, hi in ((t - x, t - x / 2.0), (t + x / 2.0, t + x)):
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi:
            continue
        mx, mn = _window_extremes(lam_n, big_lambda, lo, hi)
        best = max(best, (mx - m_t) ** 2, (mn - m_t) ** 2)
    return best


def _modulus_job(job):
    model, n, rep, seed, x_grid, t_grid = job
    spec = ModelSpec.from_dict(model)
    data = sample(spec, n, np.random.default_rng(seed))
    lam_n = build_lambda_n(spec, data)
    big_lambda = spec.lam.cumulative
    rows = []
    for x in x_grid:
        for t in t_grid:
            rows.append(_row(n, rep, seed, f"x={x!r}", t, 2.0, annulus_sup(lam_n, big_lambda, t, x)))
    return rows


def summarize_modulus(rows) -> dict:
    by = {}
    for r in rows:
        x = float(r["kind"].split("=", 1)[1])
        by.setdefault((r["n"], x, r["t"]), []).append(r["value"])
    cells = {}
    for (n, x, t), vals in by.items():
        ratio = float(np.mean(vals)) / (x / n)
        key = (n, x)
        cells[key] = max(cells.get(key, 0.0), ratio)
    keys = sorted(cells)
    ns = [k[0] for k in keys]
    ratios = [cells[k] for k in keys]
    out = {"cells": [{"n": k[0], "x": k[1], "max_ratio_over_t": cells[k]} for k in keys]}
    out.update(trend_test(ns, ratios))
    return out


def modulus_diagnostic(config: ExperimentConfig) -> ExperimentResult:
    """Estimate ``E sup_{x/2 <= |u-t| <= x} (M_n(u) - M_n(t))^2`` against ``x/n``.

    ``M_n = Lambda_n - Lambda``; the supremum over each annulus side is
    attained at its ends or at a knot (value or left limit) when Lambda is
    monotone, i.e. for a one-signed target function.
    """
    for n in config.n_grid:
        if any(x < n ** (-1.0 / 3.0) * (1.0 - 1e-12) or x > 1.0 for x in config.x_grid):
            raise ValueError(f"x-grid must lie within [n^-1/3, 1] for n={n}")
    model = {**config.model, "family": config.family}
    jobs = [
        (model, n, rep, replicate_seed(config.seed, config.family, n, rep), config.x_grid, config.t_grid)
        for n in config.n_grid
        for rep in range(config.replicates)
    ]
    rows = _run_jobs(_modulus_job, jobs, config.threads)
    return ExperimentResult("modulus", rows, summarize_modulus(rows))


def summarize(name: str, rows, config: ExperimentConfig | None = None) -> dict:
    """Recompute a summary from persisted rows."""
    if name == "risk":
        return summarize_risk(rows)
    if name == "boundary":
        return summarize_boundary(rows, config.boundary_c if config else 0.5)
    if name == "clt":
        return summarize_clt(rows)
    if name == "modulus":
        return summarize_modulus(rows)
    raise ValueError(f"unknown experiment {name!r}")


# -- pass/fail criteria -------------------------------------------------------

KS_SLACK = 1.5


def check_risk(summary: dict, tol: float = 0.05) -> list[tuple[str, bool]]:
    out = []
    for kind in ("local", "global"):
        for e in summary[kind]:
            ok = abs(e["slope"] - e["target"]) <= tol
            out.append((f"{kind} t={e['t']} p={e['p']}: slope {e['slope']:.4f} vs {e['target']:.4f}", ok))
    return out


def check_boundary(summary: dict) -> list[tuple[str, bool]]:
    out = []
    for kind in ("left", "right", "interior"):
        for e in summary[kind]:
            out.append((f"{kind} p={e['p']}: rho={e['rho']:.3f} one-sided p={e['p_value']:.3f}", not e["upward_trend"]))
    return out


def check_clt(summary: dict) -> list[tuple[str, bool]]:
    out = []
    for g in summary["groups"]:
        crit = KS_SLACK * g["ks_crit_1pct"]
        out.append((f"n={g['n']} p={g['p']}: mean {g['mean']:.4f}", abs(g["mean"]) < 0.1))
        out.append((f"n={g['n']} p={g['p']}: variance {g['variance']:.4f}", 0.8 <= g["variance"] <= 1.25))
        out.append((f"n={g['n']} p={g['p']}: KS {g['ks_distance']:.4f} < {crit:.4f}", g["ks_distance"] < crit))
    return out


def check_modulus(summary: dict) -> list[tuple[str, bool]]:
    ok = (not summary["upward_trend"]) and np.isfinite(summary["max_ratio"])
    return [(f"rho={summary['rho']:.3f} one-sided p={summary['p_value']:.3f} max ratio {summary['max_ratio']:.3f}", ok)]
