import numpy as np
import pytest

from monoslope.functions import Custom, Exponential, Linear
from monoslope.models import Censoring, Dataset, ModelSpec, build_lambda_n, model_L, sample

DENSITY = ModelSpec("density", Linear(1.5, -1.0))
POISSON = ModelSpec("poisson", Linear(2.5, -1.0))
REGRESSION = ModelSpec("regression", Linear(1.5, -1.0), variance=Linear(0.09, 0.0))
CENSORSHIP = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("uniform", 2.0))


def test_uniform_density_draws(rng):
    spec = ModelSpec("density", Linear(1.0, 0.0), validate=False)
    x = sample(spec, 20000, rng).x
    assert x.min() >= 0 and x.max() <= 1
    assert abs(x.mean() - 0.5) < 4 * np.sqrt(1 / 12 / x.size)


def test_poisson_mean_count(rng):
    # Lambda(t) = 2t
    spec = ModelSpec("poisson", Linear(2.0, 0.0), validate=False)
    data = sample(spec, 10_000, rng)
    counts = np.bincount(data.process_ids, minlength=data.n)
    assert abs(counts.mean() - 2.0) < 4 * np.sqrt(2.0 / data.n)
    assert np.all((data.times >= 0) & (data.times <= 1))


def test_poisson_times_follow_intensity(rng):
    data = sample(POISSON, 20000, rng)
    # conditional on being an event, the time has density lam / Lambda(1)
    mean = 2.5 / 2 - 1 / 3
    mean /= 2.0
    assert abs(data.times.mean() - mean) < 4 * data.times.std() / np.sqrt(data.times.size)


def test_no_censoring_before_one(rng):
    spec = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("fixed", 1.0))
    data = sample(spec, 5000, rng)
    assert np.all(data.delta[data.x < 1.0] == 1)
    assert np.all(data.x <= 1.0)


def test_failure_times_have_the_hazard(rng):
    spec = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("fixed", 5.0))
    data = sample(spec, 40000, rng)
    # P(T > 1) = exp(-Lambda(1)) = exp(-1)
    frac = np.mean(data.x > 1.0)
    assert abs(frac - np.exp(-1.0)) < 4 * np.sqrt(np.exp(-1) * (1 - np.exp(-1)) / data.n)


def test_regression_noise(rng):
    data = sample(REGRESSION, 40000, rng)
    grid = np.arange(1, data.n + 1) / data.n
    resid = data.y - (1.5 - grid)
    assert abs(resid.mean()) < 4 * 0.3 / np.sqrt(data.n)
    assert resid.var() == pytest.approx(0.09, rel=0.05)


def test_nelson_aalen_example():
    data = Dataset("censorship", 3, x=np.array([0.2, 0.5, 0.8]), delta=np.array([1, 0, 1]))
    lam_n = build_lambda_n(CENSORSHIP, data)
    assert lam_n(0.1) == 0.0
    assert lam_n(0.2) == pytest.approx(1 / 3)
    assert lam_n(0.79) == pytest.approx(1 / 3)
    assert lam_n(0.8) == pytest.approx(4 / 3)
    assert lam_n(1.0) == pytest.approx(4 / 3)


def test_nelson_aalen_ties_processed_in_order():
    data = Dataset("censorship", 4, x=np.array([0.4, 0.4, 0.4, 0.9]), delta=np.array([1, 0, 1, 1]))
    lam_n = build_lambda_n(CENSORSHIP, data)
    # events first: 1/4 + 1/3, then the censored tie leaves, then 1/1
    assert lam_n.knots.tolist() == [0.4, 0.9]
    assert lam_n(0.4) == pytest.approx(1 / 4 + 1 / 3)
    assert lam_n(0.95) == pytest.approx(1 / 4 + 1 / 3 + 1.0)


def test_nelson_aalen_no_events_is_zero():
    data = Dataset("censorship", 2, x=np.array([0.3, 1.4]), delta=np.array([0, 1]))
    lam_n = build_lambda_n(CENSORSHIP, data)
    assert lam_n.knots.size == 0 and lam_n(1.0) == 0.0


def test_regression_primitive_example():
    data = Dataset("regression", 2, y=np.array([1.0, 2.0]))
    lam_n = build_lambda_n(REGRESSION, data)
    assert lam_n(0.49) == 0.0
    assert lam_n(0.5) == 0.5
    assert lam_n(0.99) == 0.5
    assert lam_n(1.0) == 1.5


def test_empirical_cdf_example():
    data = Dataset("density", 2, x=np.array([0.75, 0.25]))
    lam_n = build_lambda_n(DENSITY, data)
    assert lam_n.knots.tolist() == [0.25, 0.75]
    assert lam_n.values.tolist() == [0.5, 1.0]


def test_poisson_primitive_and_ties():
    data = Dataset("poisson", 2, times=np.array([0.3, 0.3, 0.6]), process_ids=np.array([0, 1, 1]))
    lam_n = build_lambda_n(POISSON, data)
    assert lam_n.knots.tolist() == [0.3, 0.6]
    assert lam_n.values.tolist() == [1.0, 1.5]


@pytest.mark.parametrize("spec", [DENSITY, POISSON, CENSORSHIP, REGRESSION], ids=lambda s: s.family)
def test_primitive_converges(spec, rng):
    grid = np.linspace(0, 1, 201)
    errs = []
    for n in (500, 8000):
        data = sample(spec, n, rng)
        lam_n = build_lambda_n(spec, data)
        errs.append(np.max(np.abs(lam_n(grid) - spec.lam.cumulative(grid))))
        if spec.family != "regression":
            assert np.all(np.diff(lam_n(grid)) >= 0)
    assert errs[1] < errs[0]
    assert errs[1] < 5 / np.sqrt(8000)


@pytest.mark.parametrize("spec", [DENSITY, POISSON, CENSORSHIP, REGRESSION], ids=lambda s: s.family)
def test_sampling_is_deterministic(spec):
    a = sample(spec, 300, np.random.default_rng(7))
    b = sample(spec, 300, np.random.default_rng(7))
    assert a.to_csv() == b.to_csv()


def test_time_change_fixed_censoring():
    spec = ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("fixed", 1.0))
    big_l, l_prime = model_L(spec)
    t = np.linspace(0, 0.99, 23)
    one_minus_f = np.exp(-spec.lam.cumulative(t))
    np.testing.assert_allclose(big_l(t), 1 / one_minus_f - 1, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(l_prime(t), spec.lam(t) / one_minus_f, rtol=1e-12)


def test_time_change_uniform_density():
    spec = ModelSpec("density", Linear(1.0, 0.0), validate=False)
    big_l, l_prime = model_L(spec)
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(big_l(t), t)
    np.testing.assert_allclose(l_prime(t), 1.0)


def test_time_change_regression_constant_variance():
    big_l, l_prime = model_L(REGRESSION)
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(big_l(t), 0.09 * t)


@pytest.mark.parametrize("spec", [DENSITY, POISSON, CENSORSHIP, REGRESSION], ids=lambda s: s.family)
def test_time_change_is_increasing(spec):
    big_l, l_prime = model_L(spec)
    t = np.linspace(0, 1, 101)
    assert np.all(np.diff(big_l(t)) > 0)
    assert np.all(l_prime(t) > 0)
    # L' is the derivative of L
    h = 1e-5
    mid = t[1:-1]
    np.testing.assert_allclose((big_l(mid + h) - big_l(mid - h)) / (2 * h), l_prime(mid), rtol=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("density", Linear(1.6, -1.0))  # integrates to 1.1
    with pytest.raises(ValueError):
        ModelSpec("poisson", Linear(1.0, 0.0))  # flat
    with pytest.raises(ValueError):
        ModelSpec("poisson", Linear(1.5, -1.0), direction="nondecreasing")
    with pytest.raises(ValueError):
        ModelSpec("censorship", Linear(1.5, -1.0), censoring=Censoring("uniform", 0.5))
    with pytest.raises(ValueError):
        ModelSpec("tobit", Linear(1.5, -1.0))


def test_custom_function_numeric_primitive(rng):
    f = Custom(lambda t: 2.0 - t**2, lambda t: -2.0 * t)
    t = np.linspace(0, 1, 9)
    np.testing.assert_allclose(f.cumulative(t), 2 * t - t**3 / 3, rtol=1e-12, atol=1e-15)
    v = f.cumulative(t)
    np.testing.assert_allclose(f.inverse_cumulative(v), t, atol=1e-12)
    e = Exponential(2.0, -0.5)
    np.testing.assert_allclose(e.inverse_cumulative(e.cumulative(t)), t, atol=1e-12)


def test_spec_round_trip():
    for spec in (DENSITY, POISSON, CENSORSHIP, REGRESSION):
        again = ModelSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()


@pytest.mark.parametrize("spec", [DENSITY, POISSON, CENSORSHIP, REGRESSION], ids=lambda s: s.family)
def test_dataset_csv_round_trip(spec, rng, tmp_path):
    data = sample(spec, 50, rng)
    path = tmp_path / "d.csv"
    data.to_csv(path)
    back = Dataset.from_csv(spec.family, path, n=data.n)
    assert back.to_csv() == data.to_csv()
    header = path.read_text().splitlines()[0]
    assert header == {"censorship": "x,delta", "regression": "i,y", "density": "x", "poisson": "process_id,event_time"}[spec.family]
