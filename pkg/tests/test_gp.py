import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanillabo.exceptions import ContractViolation, NumericalError
from vanillabo.gp import (
    Dataset,
    GPModel,
    Hyperparameters,
    KernelFamily,
    KernelSpec,
    ard_distance,
    cholesky_with_jitter,
    gram,
    kernel_eval,
)

FAMILIES = [KernelFamily.RBF, KernelFamily.MATERN52]


def dense_oracle(family, hp, X, y, Xq):
    """Textbook GP posterior with an explicit inverse, kernel written out by hand."""

    def k(a, b):
        r = math.sqrt(sum(((ai - bi) / li) ** 2 for ai, bi, li in zip(a, b, hp.lengthscales)))
        if family is KernelFamily.RBF:
            return hp.signal_variance * math.exp(-0.5 * r * r)
        s = math.sqrt(5.0) * r
        return hp.signal_variance * (1 + s + s * s / 3.0) * math.exp(-s)

    K = np.array([[k(a, b) for b in X] for a in X]) + hp.noise_variance * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    Ks = np.array([[k(q, b) for b in X] for q in Xq])
    mean = hp.mean_constant + Ks @ Kinv @ (y - hp.mean_constant)
    var = np.array([k(q, q) for q in Xq]) - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    sign, logdet = np.linalg.slogdet(K)
    r = y - hp.mean_constant
    lml = -0.5 * r @ Kinv @ r - 0.5 * logdet - 0.5 * len(y) * math.log(2 * math.pi)
    return mean, var, lml


def random_instance(rng, family=None):
    n = int(rng.integers(1, 9))
    d = int(rng.integers(1, 4))
    hp = Hyperparameters(
        rng.uniform(0.2, 2.0, d), rng.uniform(0.5, 2.0), rng.uniform(1e-3, 0.5), rng.normal()
    )
    family = family or FAMILIES[int(rng.integers(2))]
    X = rng.uniform(size=(n, d))
    y = rng.normal(size=n)
    return KernelSpec(d, family), hp, Dataset(X, y)


def test_matern_reference_values():
    spec = KernelSpec(1, KernelFamily.MATERN52)
    hp = Hyperparameters([1.0], 2.0, 0.0)
    s5 = math.sqrt(5.0)
    assert kernel_eval(spec, hp, [0.0], [0.0]) == pytest.approx(2.0)
    assert kernel_eval(spec, hp, [0.0], [1.0]) == pytest.approx(2.0 * (1 + s5 + 5 / 3) * math.exp(-s5))


def test_rbf_reference_value():
    spec = KernelSpec(2, KernelFamily.RBF)
    hp = Hyperparameters([0.5, 2.0], 1.0, 0.0)
    r2 = (0.3 / 0.5) ** 2 + (0.4 / 2.0) ** 2
    assert kernel_eval(spec, hp, [0.1, 0.2], [0.4, 0.6]) == pytest.approx(math.exp(-0.5 * r2))


def test_ard_distance_rejects_bad_lengths():
    with pytest.raises(ContractViolation):
        ard_distance([0.0, 1.0], [0.0], [1.0, 1.0])
    with pytest.raises(ContractViolation):
        Hyperparameters([1.0, 0.0])


@pytest.mark.parametrize("family", FAMILIES)
def test_posterior_matches_dense_inverse(family, rng):
    for _ in range(50):
        spec, hp, data = random_instance(rng, family)
        Xq = rng.uniform(size=(5, spec.dim))
        m = GPModel(spec, hp, data)
        post = m.posterior(Xq)
        mean, var, lml = dense_oracle(family, hp, data.X, data.y, Xq)
        np.testing.assert_allclose(post.mean, mean, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(post.variance, var, rtol=1e-8, atol=1e-12)
        assert m.log_marginal_likelihood(with_grad=False) == pytest.approx(lml, rel=1e-9)


def test_empty_dataset_gives_prior():
    spec = KernelSpec(2)
    hp = Hyperparameters([0.3, 0.3], 1.7, 1e-3, 0.4)
    post = GPModel(spec, hp, Dataset.empty(2)).posterior(np.array([[0.1, 0.9], [0.5, 0.5]]))
    np.testing.assert_allclose(post.mean, 0.4)
    np.testing.assert_allclose(post.variance, 1.7)


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("family", FAMILIES)
def test_lml_gradient_matches_finite_differences(family, rng):
    for _ in range(10):
        spec, hp, data = random_instance(rng, family)
        if data.n < 2:
            continue
        raw = hp.to_raw()

        def lml(r):
            return GPModel(spec, Hyperparameters.from_raw(r), data).log_marginal_likelihood(False)

        _, g = GPModel(spec, hp, data).log_marginal_likelihood(True)
        fd = fd_grad(lml, raw)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("family", FAMILIES)
def test_posterior_input_gradient(family, rng):
    spec, hp, data = random_instance(np.random.default_rng(3), family)
    m = GPModel(spec, hp, data)
    x = rng.uniform(0.1, 0.9, spec.dim)
    mean, var, dmean, dvar = m.posterior_gradient(x[None])
    fm = fd_grad(lambda z: m.posterior(z[None]).mean[0], x)
    fv = fd_grad(lambda z: m.posterior(z[None]).variance[0], x)
    np.testing.assert_allclose(dmean[0], fm, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(dvar[0], fv, rtol=1e-5, atol=1e-8)


def test_variance_at_training_point_is_noise_limited():
    spec = KernelSpec(1, KernelFamily.RBF)
    hp = Hyperparameters([0.2], 1.0, 1e-6)
    m = GPModel(spec, hp, Dataset(np.array([[0.5]]), np.array([1.0])))
    post = m.posterior(np.array([[0.5]]))
    assert post.variance[0] < 2e-6
    assert post.mean[0] == pytest.approx(1.0, abs=1e-5)


def test_jitter_escalates_then_fails():
    A = np.ones((3, 3))  # rank one
    L, jitter = cholesky_with_jitter(A)
    assert 1e-8 <= jitter <= 1e-4
    np.testing.assert_allclose(L @ L.T, A + jitter * np.eye(3), atol=1e-12)
    with pytest.raises(NumericalError) as info:
        cholesky_with_jitter(np.array([[1.0, 0.0], [0.0, -1.0]]))
    assert info.value.jitter == pytest.approx(1e-4)


def test_no_jitter_for_well_conditioned():
    _, jitter = cholesky_with_jitter(np.eye(4) * 2.0)
    assert jitter == 0.0


def test_dataset_rejects_points_outside_cube():
    with pytest.raises(ContractViolation):
        Dataset(np.array([[1.5]]), np.array([0.0]))
    with pytest.raises(ContractViolation):
        Dataset(np.zeros((2, 1)), np.zeros(3))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=5),
    st.floats(-5, 5),
    st.floats(-12, 2),
    st.floats(-10, 10),
)
def test_raw_round_trip(log_ls, log_sf2, log_noise, c):
    raw = np.array([*log_ls, log_sf2, log_noise, c])
    back = Hyperparameters.from_raw(raw).to_raw()
    np.testing.assert_allclose(back, raw, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_posterior_variance_bounded_by_prior(seed):
    rng = np.random.default_rng(seed)
    spec, hp, data = random_instance(rng)
    post = GPModel(spec, hp, data).posterior(rng.uniform(size=(8, spec.dim)))
    assert np.all(post.variance >= 0)
    assert np.all(post.variance <= hp.signal_variance * (1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gram_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    spec, hp, data = random_instance(rng)
    K = gram(spec, hp, data.X)
    np.testing.assert_allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-10
