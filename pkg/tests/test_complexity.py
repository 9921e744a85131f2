import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanillabo.complexity import (
    ModelClassSpec,
    Variant,
    addgp_groups,
    build_model_class,
    greedy_mig,
    independent_ig,
    information_gain,
    log_grid,
    sobol_mig,
    write_mig_csv,
)
from vanillabo.exceptions import ContractViolation
from vanillabo.sampling import sobol


def test_information_gain_matches_slogdet(rng):
    A = rng.normal(size=(12, 12))
    K = A @ A.T
    ref = 0.5 * np.linalg.slogdet(np.eye(12) + K / 0.3)[1]
    assert information_gain(K, 0.3) == pytest.approx(ref, rel=1e-12)
    assert information_gain(np.zeros((0, 0)), 1.0) == 0.0
    with pytest.raises(ContractViolation):
        information_gain(K, 0.0)


def test_independent_closed_form():
    curve = sobol_mig(ModelClassSpec(Variant.INDEPENDENT, noise_variance=0.5), 7, 100, counts=[1, 10, 100])
    np.testing.assert_allclose(curve.values, independent_ig(np.array([1, 10, 100]), 1.0, 0.5), rtol=1e-12)
    assert independent_ig(10, 1.0, 1.0) == pytest.approx(5 * math.log(2))


def test_curve_matches_direct(rng):
    spec = ModelClassSpec(Variant.SCALED, lengthscale=0.5)
    X = sobol(60, 5, 0)
    m = build_model_class(spec, 5)
    counts = [1, 7, 30, 60]
    direct = [m.information_gain(X[:k]) for k in counts]
    np.testing.assert_allclose(m.ig_curve(X, counts), direct, rtol=1e-10)


def test_scaled_lengthscale_rule():
    m = build_model_class(ModelClassSpec(Variant.SCALED), 24)
    np.testing.assert_allclose(m.lengthscales, 0.5 * 2.0)
    assert build_model_class(ModelClassSpec(Variant.SCALED), 6).lengthscales[0] == pytest.approx(0.5)


def test_rembo_embedding_dims():
    m = build_model_class(ModelClassSpec(Variant.REMBO, effective_dim=4), 40)
    assert m.input_dim == 4 and m.embedding.shape == (40, 4)
    with pytest.raises(ContractViolation):
        build_model_class(ModelClassSpec(Variant.REMBO, effective_dim=4), 3)


def test_addgp_groups_partition():
    groups = addgp_groups(50, np.random.default_rng(0))
    assert sorted(i for g in groups for i in g) == list(range(50))


def test_local_candidate_side():
    m = build_model_class(ModelClassSpec(Variant.LOCAL, lengthscale=0.5, shrink_factor=0.4), 10)
    assert m.candidate_side == pytest.approx(0.2)


def test_greedy_near_optimal_brute_force():
    pool = sobol(20, 1, 3)
    for ls in (0.05, 0.1, 0.3):
        spec = ModelClassSpec(Variant.FIXED, lengthscale=ls)
        g = greedy_mig(spec, pool, 4).values[-1]
        m = build_model_class(spec, 1)
        best = max(m.information_gain(pool[list(c)]) for c in itertools.combinations(range(20), 4))
        assert g >= (1 - 1 / math.e) * best
        assert g <= best + 1e-12


def test_greedy_matches_direct_ig_of_selection():
    spec = ModelClassSpec(Variant.FIXED, lengthscale=0.2, noise_variance=0.1)
    pool = sobol(40, 2, 1)
    curve = greedy_mig(spec, pool, 10)
    assert len(curve.values) == 10 and not curve.truncated
    assert np.all(np.diff(curve.values) > 0)
    assert greedy_mig(spec, pool[:5], 10).truncated


def test_log_grid():
    g = log_grid(1000)
    assert g[0] == 1 and g[-1] == 1000 and np.all(np.diff(g) > 0)


VARIANTS = [Variant.FIXED, Variant.SCALED, Variant.LOCAL, Variant.ADDGP, Variant.REMBO]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(VARIANTS), st.integers(4, 30), st.floats(0.05, 2.0), st.floats(0.01, 2.0))
def test_ig_bounded_by_independent_and_monotone(variant, dim, ls, noise):
    spec = ModelClassSpec(variant, lengthscale=ls, noise_variance=noise)
    curve = sobol_mig(spec, dim, 60, counts=[5, 20, 60])
    assert np.all(np.diff(curve.values) > 0)
    assert np.all(curve.values <= independent_ig(curve.counts, 1.0, noise) * (1 + 1e-10))


def test_fixed_saturates_to_independent_in_high_d():
    curve = sobol_mig(ModelClassSpec(Variant.FIXED), 60, 200, counts=[200])
    assert curve.values[0] == pytest.approx(independent_ig(200, 1.0, 1.0), rel=1e-6)


def test_mig_csv():
    buf = io.StringIO()
    write_mig_csv(buf, [("fixed", 5, 10, 1.5, 1.0, 0)])
    assert buf.getvalue().splitlines() == ["variant,D,n,gamma_nats,sigma_eps2,seed", "fixed,5,10,1.5,1,0"]
