"""Limit constants of the L_p-error and the goodness-of-fit test."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import norm

from .chernoff import ChernoffEstimate
from .estimator import monotone_estimate, monotone_estimate_csd
from .models import Dataset, ModelSpec, build_lambda_n, model_L
from .quadrature import DEFAULT_QUAD, QuadSettings, integrate
from .stepfn import StepFunction, lp_distance

__all__ = [
    "LimitConstants",
    "GofResult",
    "limit_constants",
    "normalized_statistic",
    "gof_test",
    "gof_from_error",
    "plugin_l_prime",
]

P_MAX = 2.5


@dataclass
class LimitConstants:
    """Asymptotic mean ``m_p`` and variance ``sigma_p2`` of the L_p-error."""

    p: float
    m_p: float
    sigma_p2: float
    mean_integral: float
    variance_integral: float
    m_p_se: float = 0.0
    sigma_p2_se: float = 0.0
    chernoff: dict = field(default_factory=dict)
    quad: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.m_p > 0 and self.sigma_p2 > 0):
            raise ValueError(f"invalid limit constants m_p={self.m_p!r}, sigma_p2={self.sigma_p2!r}")

    @property
    def sigma_p(self) -> float:
        return float(np.sqrt(self.sigma_p2))

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "m_p": self.m_p,
            "sigma_p2": self.sigma_p2,
            "mean_integral": self.mean_integral,
            "variance_integral": self.variance_integral,
            "m_p_se": self.m_p_se,
            "sigma_p2_se": self.sigma_p2_se,
            "chernoff": self.chernoff,
            "quad": self.quad,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def limit_constants(
    spec: ModelSpec,
    p: float,
    chernoff: ChernoffEstimate,
    quad: QuadSettings = DEFAULT_QUAD,
    l_prime: Callable | None = None,
    breakpoints=None,
    panels: int = 8,
) -> LimitConstants:
    """Asymptotic mean and variance of ``n^{p/3} int |lam_hat - lam|^p``.

    ``m_p = E|X(0)|^p * int |4 lam' L'|^{p/3}`` and
    ``sigma_p2 = 8 k_p * int |4 lam' L'|^{2(p-1)/3} L'``. ``l_prime``
    overrides the model's L' (plug-in estimates); ``breakpoints`` lists its
    discontinuities so the quadrature partition respects them.
    """
    if not 1.0 <= p < P_MAX:
        raise ValueError(f"p must lie in [1, 5/2), got {p!r}")
    if abs(chernoff.p - p) > 1e-12:
        raise ValueError(f"Chernoff estimate is for p={chernoff.p!r}, not {p!r}")
    if l_prime is None:
        l_prime = model_L(spec)[1]
    dlam = spec.lam.derivative

    def drift(t):
        return np.abs(4.0 * dlam(t) * l_prime(t))

    mean_int = integrate(lambda t: drift(t) ** (p / 3.0), breakpoints=breakpoints, panels=panels, settings=quad)
    var_int = integrate(
        lambda t: drift(t) ** (2.0 * (p - 1.0) / 3.0) * l_prime(t),
        breakpoints=breakpoints,
        panels=panels,
        settings=quad,
    )
    return LimitConstants(
        p=float(p),
        m_p=chernoff.moment_p * mean_int,
        sigma_p2=8.0 * chernoff.k_p * var_int,
        mean_integral=mean_int,
        variance_integral=var_int,
        m_p_se=chernoff.moment_se * mean_int,
        sigma_p2_se=8.0 * chernoff.k_p_se * var_int,
        chernoff={k: v for k, v in chernoff.to_dict().items() if k not in ("a_grid", "cov", "cov_se")},
        quad={"order": quad.order, "check_order": quad.check_order, "rtol": quad.rtol, "panels": panels},
    )


def normalized_statistic(Jn: float, n: int, constants: LimitConstants) -> float:
    """``n^{1/6} (n^{p/3} Jn - m_p) / sigma_p``; asymptotically N(0, 1)."""
    if Jn < 0 or n < 1:
        raise ValueError("need Jn >= 0 and n >= 1")
    sigma = constants.sigma_p
    if not sigma > 0:
        raise RuntimeError("sigma_p must be positive")
    p = constants.p
    return float(n ** (1.0 / 6.0) * (n ** (p / 3.0) * Jn - constants.m_p) / sigma)


@dataclass
class GofResult:
    statistic: float
    p_value: float
    Jn: float
    n: int
    p: float
    constants: LimitConstants

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "Jn": self.Jn,
            "n": self.n,
            "p": self.p,
            "constants": self.constants.to_dict(),
        }


def gof_from_error(Jn: float, n: int, constants: LimitConstants) -> GofResult:
    """One-sided test: large L_p distances reject."""
    stat = normalized_statistic(Jn, n, constants)
    return GofResult(stat, float(norm.sf(stat)), float(Jn), int(n), constants.p, constants)


def _local_mean(values: np.ndarray, half_width: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(values)])
    i = np.arange(values.size)
    lo = np.maximum(i - half_width, 0)
    hi = np.minimum(i + half_width + 1, values.size)
    return (c[hi] - c[lo]) / (hi - lo)


def plugin_l_prime(spec0: ModelSpec, data: Dataset) -> tuple[Callable, np.ndarray | None]:
    """Estimate L' under the simple null ``spec0``.

    Returns the handle and its discontinuities (or None when smooth).
    density, poisson: L' = lam0. regression: sigma^2 from squared first
    differences averaged over ceil(n^{1/3}) neighbours. censorship:
    lam0 / P_n(X >= t), the empirical at-risk fraction.
    """
    fam = spec0.family
    if fam in ("density", "poisson"):
        return spec0.lam, None
    n = data.n
    if fam == "regression":
        if n < 3:
            raise ValueError("regression plug-in needs n >= 3")
        d2 = np.diff(data.y) ** 2 / 2.0
        smooth = _local_mean(d2, int(np.ceil(n ** (1.0 / 3.0))))
        # one value per cell ((i-1)/n, i/n], i = 1..n
        cell = np.concatenate([[smooth[0]], 0.5 * (smooth[:-1] + smooth[1:]), [smooth[-1]]])
        step = StepFunction(np.arange(1, n) / n, cell[1:], cell[0])
        return step, np.arange(1, n) / n
    x = np.sort(np.asarray(data.x, dtype=float))
    if not np.any((np.asarray(data.delta) == 1) & (np.asarray(data.x) <= 1.0)):
        raise ValueError("censorship data has no uncensored observation in [0, 1]")
    lam0 = spec0.lam

    def l_prime(t):
        t = np.asarray(t, dtype=float)
        at_risk = (n - np.searchsorted(x, t, side="left")) / n
        if np.any(at_risk <= 0):
            raise ValueError("empty risk set inside [0, 1]; plug-in L' undefined")
        return lam0(t) / at_risk

    return l_prime, x[(x > 0) & (x < 1)]


def gof_test(
    data: Dataset,
    spec0: ModelSpec,
    p: float,
    chernoff: ChernoffEstimate,
    quad: QuadSettings = DEFAULT_QUAD,
    variant: str = "hat",
) -> GofResult:
    """Test ``lam = spec0.lam`` against monotone alternatives."""
    lam_n = build_lambda_n(spec0, data)
    if spec0.family == "censorship" and lam_n.knots.size == 0:
        raise ValueError("censorship data has no uncensored observation in [0, 1]")
    build = monotone_estimate if variant == "hat" else monotone_estimate_csd
    est = build(lam_n, spec0.direction)
    Jn = lp_distance(est.estimate, spec0.lam, p, quad)
    lp, bp = plugin_l_prime(spec0, data)
    constants = limit_constants(spec0, p, chernoff, quad, l_prime=lp, breakpoints=bp)
    return gof_from_error(Jn, data.n, constants)
