import numpy as np
import pytest
from scipy.stats import norm

from monoslope.asymptotics import (
    LimitConstants,
    gof_from_error,
    gof_test,
    limit_constants,
    normalized_statistic,
    plugin_l_prime,
)
from monoslope.chernoff import ChernoffEstimate
from monoslope.functions import Custom, Exponential, Linear
from monoslope.models import Censoring, Dataset, ModelSpec, model_L, sample


def fake_chernoff(p=1.0, moment=0.41, k=0.02):
    return ChernoffEstimate(
        p=p, moment_p=moment, moment_se=1e-3, k_p=k, k_p_se=1e-3, mean_x0=0.0, mean_x0_se=1e-3,
        reps=1000, h=2e-3, T=6.0, a_max=4.0, a_step=0.1, seed=0, batches=10, boundary_rate=0.0,
    )


DENSITY = ModelSpec("density", Linear(1.5, -1.0))


def test_constant_integrand():
    # regression with lam' = -2 and sigma^2 = 0.5: lam' L' = -1
    spec = ModelSpec("regression", Linear(2.0, -2.0), variance=Linear(0.5, 0.0))
    for p in (1.0, 1.5, 2.2):
        c = limit_constants(spec, p, fake_chernoff(p))
        assert c.m_p == pytest.approx(0.41 * 4 ** (p / 3), rel=1e-12)


def test_density_closed_form():
    c = limit_constants(DENSITY, 1.0, fake_chernoff())
    closed = 4 ** (1 / 3) * 0.75 * (1.5 ** (4 / 3) - 0.5 ** (4 / 3))
    assert c.mean_integral == pytest.approx(closed, rel=1e-8, abs=0)
    assert c.m_p == pytest.approx(0.41 * closed, rel=1e-8)


def test_variance_at_p1():
    c = limit_constants(DENSITY, 1.0, fake_chernoff())
    # exponent 2(p-1)/3 vanishes: sigma^2 = 8 k (L(1) - L(0)) = 8k
    assert c.sigma_p2 == pytest.approx(8 * 0.02, rel=1e-12)
    spec = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("uniform", 2.0))
    big_l, _ = model_L(spec)
    c = limit_constants(spec, 1.0, fake_chernoff())
    assert c.sigma_p2 == pytest.approx(8 * 0.02 * big_l(1.0), rel=1e-9)


def test_range_of_p():
    with pytest.raises(ValueError):
        limit_constants(DENSITY, 2.5, fake_chernoff(2.5))
    with pytest.raises(ValueError):
        limit_constants(DENSITY, 0.9, fake_chernoff(0.9))
    with pytest.raises(ValueError):
        limit_constants(DENSITY, 1.5, fake_chernoff(1.0))


def test_partition_invariance():
    spec = ModelSpec("poisson", Exponential(2.0, -1.5))
    a = limit_constants(spec, 1.7, fake_chernoff(1.7), panels=8)
    b = limit_constants(spec, 1.7, fake_chernoff(1.7), panels=13, breakpoints=[0.123, 0.77])
    assert b.m_p == pytest.approx(a.m_p, rel=1e-8)
    assert b.sigma_p2 == pytest.approx(a.sigma_p2, rel=1e-8)


def test_independent_l_prime_agrees():
    spec = ModelSpec("poisson", Exponential(2.0, -1.5))
    a = limit_constants(spec, 1.4, fake_chernoff(1.4))
    b = limit_constants(spec, 1.4, fake_chernoff(1.4), l_prime=lambda t: 2.0 * np.exp(-1.5 * t))
    assert a.m_p == pytest.approx(b.m_p, rel=1e-12)
    assert a.sigma_p2 == pytest.approx(b.sigma_p2, rel=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_mean_increases_with_slope_scale(p):
    values = []
    for scale in (1.0, 1.3, 1.7):
        spec = ModelSpec("regression", Linear(2.0, -scale), variance=Linear(0.2, 0.0))
        values.append(limit_constants(spec, p, fake_chernoff(p)).m_p)
    assert values[0] < values[1] < values[2]


def test_normalized_statistic_examples():
    c = limit_constants(DENSITY, 1.5, fake_chernoff(1.5))
    n = 12345
    assert normalized_statistic(c.m_p * n ** (-0.5), n, c) == pytest.approx(0.0, abs=1e-10)
    jn = (c.m_p + c.sigma_p * n ** (-1 / 6)) * n ** (-0.5)
    assert normalized_statistic(jn, n, c) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(ValueError):
        normalized_statistic(-1.0, n, c)


def test_invalid_constants():
    with pytest.raises(ValueError):
        LimitConstants(p=1.0, m_p=0.0, sigma_p2=1.0, mean_integral=0, variance_integral=1)


def test_zero_distance_gof():
    c = limit_constants(DENSITY, 1.0, fake_chernoff())
    n = 50_000
    res = gof_from_error(0.0, n, c)
    assert res.statistic == pytest.approx(-n ** (1 / 6) * c.m_p / c.sigma_p)
    assert res.p_value == pytest.approx(1.0, abs=1e-6)
    assert res.p_value == pytest.approx(norm.sf(res.statistic))


@pytest.mark.parametrize(
    "spec",
    [
        DENSITY,
        ModelSpec("poisson", Linear(2.5, -1.0)),
        ModelSpec("regression", Linear(1.5, -1.0), variance=Linear(0.09, 0.0)),
        ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("uniform", 2.0)),
    ],
    ids=lambda s: s.family,
)
def test_gof_runs_for_every_family(spec, rng):
    data = sample(spec, 4000, rng)
    res = gof_test(data, spec, 1.0, fake_chernoff())
    assert 0.0 <= res.p_value <= 1.0
    assert res.Jn > 0
    assert res.to_dict()["constants"]["m_p"] > 0


def test_plugins_are_consistent(rng):
    reg = ModelSpec("regression", Linear(1.5, -1.0), variance=Linear(0.05, 0.1))
    data = sample(reg, 60_000, rng)
    lp, bp = plugin_l_prime(reg, data)
    # pointwise the local window is short, so compare averages over a fine grid
    t = np.linspace(0.05, 0.95, 10)
    for lo, hi in ((0.0, 0.5), (0.5, 1.0)):
        grid = np.linspace(lo, hi, 4001)
        assert lp(grid).mean() == pytest.approx(reg.variance(grid).mean(), rel=0.03)
    assert bp is not None

    cens = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("exponential", 0.5))
    data = sample(cens, 60_000, rng)
    lp, _ = plugin_l_prime(cens, data)
    _, true_lp = model_L(cens)
    np.testing.assert_allclose(lp(t), true_lp(t), rtol=0.03)


def test_gof_rejects_degenerate_censorship():
    spec = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("uniform", 2.0))
    data = Dataset("censorship", 3, x=np.array([0.2, 0.4, 1.5]), delta=np.array([0, 0, 1]))
    with pytest.raises(ValueError, match="uncensored"):
        gof_test(data, spec, 1.0, fake_chernoff())
