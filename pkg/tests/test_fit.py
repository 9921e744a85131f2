import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from vanillabo.exceptions import ContractViolation
from vanillabo.fit import (
    FitConfig,
    FitMode,
    Fixed,
    Gamma,
    HyperpriorSpec,
    LogNormal,
    ScaledLogNormal,
    fit,
    map_objective,
    scaled_lengthscale_prior,
    signal_variance_hat,
    standardize,
)
from vanillabo.gp import Dataset, GPModel, Hyperparameters, KernelFamily, KernelSpec, gram


def test_scaled_prior_mode_at_d6():
    prior = ScaledLogNormal().for_dim(6)
    assert prior.mode == pytest.approx(0.5016, abs=1e-3)


def test_scaled_prior_mode_grows_with_sqrt_d():
    m1 = ScaledLogNormal().for_dim(1).mode
    for d in (4, 25, 100, 1000):
        assert ScaledLogNormal().for_dim(d).mode == pytest.approx(m1 * math.sqrt(d), rel=1e-12)


def test_scaled_prior_rejects_bad_dim():
    with pytest.raises(ContractViolation):
        scaled_lengthscale_prior(0, 1.0, 1.0)


@pytest.mark.parametrize("loc,scale", [(0.0, 1.0), (1.3, 0.4), (-4.0, 1.0)])
def test_lognormal_density_matches_scipy(loc, scale):
    x = np.array([0.01, 0.3, 1.0, 7.0])
    ref = stats.lognorm(s=scale, scale=math.exp(loc)).logpdf(x)
    val, _ = LogNormal(loc, scale).logpdf(x)
    np.testing.assert_allclose(val, ref, rtol=1e-12)


def test_gamma_density_matches_scipy():
    x = np.array([0.05, 0.5, 2.0])
    val, _ = Gamma(3.0, 6.0).logpdf(x)
    np.testing.assert_allclose(val, stats.gamma(a=3.0, scale=1 / 6.0).logpdf(x), rtol=1e-12)
    assert Gamma(3.0, 6.0).mode == pytest.approx(1 / 3)


def test_gamma_dimension_scaling():
    g = Gamma(3.0, 6.0, scale_with_dim=True).for_dim(16)
    assert g.beta == pytest.approx(1.5)
    assert Gamma(3.0, 6.0).for_dim(16).beta == 6.0


@pytest.mark.parametrize("prior", [LogNormal(0.5, 1.2), Gamma(3.0, 6.0)])
def test_prior_raw_gradient(prior):
    theta = np.array([-1.0, 0.0, 0.7])
    _, g = prior.logpdf_raw(theta)
    h = 1e-6
    fd = (prior.logpdf_raw(theta + h)[0] - prior.logpdf_raw(theta - h)[0]) / (2 * h)
    np.testing.assert_allclose(g, fd, rtol=1e-6)


def _data(rng, n=20, d=2, ls=0.5, noise=1e-3):
    X = rng.uniform(size=(n, d))
    K = gram(KernelSpec(d), Hyperparameters(np.full(d, ls)), X) + noise * np.eye(n)
    y = np.linalg.cholesky(K) @ rng.standard_normal(n)
    return Dataset(X, y)


@pytest.mark.parametrize("mode", [FitMode.MAP, FitMode.MLE])
def test_map_objective_gradient(mode, rng):
    data = _data(rng)
    spec = KernelSpec(2)
    priors = HyperpriorSpec(signal_variance=LogNormal(0.0, 1.0))
    raw = np.array([-0.5, 0.1, 0.2, -3.0, 0.3])

    def f(r):
        return map_objective(GPModel(spec, Hyperparameters.from_raw(r), data), priors, mode)[0]

    _, g = map_objective(GPModel(spec, Hyperparameters.from_raw(raw), data), priors, mode)
    h = 1e-6
    fd = np.array([(f(raw + h * e) - f(raw - h * e)) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_map_objective_zeroes_fixed_gradients(rng):
    data = _data(rng)
    model = GPModel(KernelSpec(2), Hyperparameters([0.4, 0.4], 1.0, 1e-2), data)
    _, g = map_objective(model, HyperpriorSpec())
    assert g[2] == 0.0  # signal variance is fixed by default


def test_fit_recovers_lengthscale_order(rng):
    data = _data(rng, n=30, ls=0.5)
    res = fit(data, KernelSpec(2), seed=1)
    assert np.all(res.hp.lengthscales > 0.5 / 3) and np.all(res.hp.lengthscales < 0.5 * 3)
    assert res.hp.signal_variance == 1.0
    assert 1 <= res.restarts_used <= 4


def test_fit_keeps_fixed_values_exact(rng):
    data = _data(rng)
    priors = HyperpriorSpec(noise=Fixed(0.0123), signal_variance=Fixed(2.5))
    res = fit(data, KernelSpec(2), priors, seed=0)
    assert res.hp.noise_variance == 0.0123
    assert res.hp.signal_variance == 2.5


def test_fit_is_deterministic(rng):
    data = _data(rng)
    a = fit(data, KernelSpec(2), seed=[4, 2])
    b = fit(data, KernelSpec(2), seed=[4, 2])
    assert a.hp == b.hp and a.objective_value == b.objective_value


def test_fit_beats_prior_mode_start(rng):
    data = _data(rng)
    priors = HyperpriorSpec()
    spec = KernelSpec(2)
    res = fit(data, spec, priors, FitConfig(n_restarts=1), seed=0)
    mode_hp = Hyperparameters(np.full(2, priors.lengthscale.for_dim(2).mode), 1.0, math.exp(-5.0))
    start, _ = map_objective(GPModel(spec, mode_hp, data), priors)
    assert res.objective_value >= start - 1e-9
    assert res.restart_index == 0


def test_fit_needs_two_points():
    with pytest.raises(ContractViolation):
        fit(Dataset(np.array([[0.5]]), np.array([1.0])), KernelSpec(1))


def test_gamma_map_learns_short_lengthscales(rng):
    data = _data(rng, n=15, d=3, ls=1.5)
    g = fit(data, KernelSpec(3, KernelFamily.MATERN52), HyperpriorSpec(lengthscale=Gamma(3.0, 6.0)), seed=0)
    s = fit(data, KernelSpec(3, KernelFamily.MATERN52), HyperpriorSpec(), seed=0)
    assert np.median(g.hp.lengthscales) < np.median(s.hp.lengthscales)


def test_signal_variance_hat(rng):
    data = _data(rng, n=12)
    model = GPModel(KernelSpec(2), Hyperparameters([0.5, 0.5], 1.0, 1e-3), data)
    K = gram(KernelSpec(2), model.hp, data.X) + 1e-3 * np.eye(12)
    expected = data.y @ np.linalg.solve(K, data.y) / 12
    assert signal_variance_hat(data.y, model) == pytest.approx(expected, rel=1e-10)
    with pytest.raises(ContractViolation):
        signal_variance_hat(data.y, GPModel(KernelSpec(2), Hyperparameters([0.5, 0.5], 2.0), data))


def test_standardize_examples():
    z, mean, scale = standardize([1.0, 2.0, 3.0])
    np.testing.assert_allclose(z, [-1.0, 0.0, 1.0])
    assert (mean, scale) == (2.0, 1.0)
    z, _, scale = standardize([5.0, 5.0])
    assert np.all(z == 0) and scale == 1.0
    z, _, _ = standardize([3.0])
    assert z.tolist() == [0.0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
def test_standardize_properties(values):
    z, mean, scale = standardize(values)
    np.testing.assert_allclose(z * scale + mean, values, rtol=1e-9, atol=1e-6 * max(1.0, scale))
    if np.ptp(values) > 1e-6 * max(1.0, np.max(np.abs(values))):
        assert abs(z.mean()) < 1e-9
        assert z.std(ddof=1) == pytest.approx(1.0, rel=1e-9)
