import numpy as np
import pytest

from vanillabo.benchmarks import as_problem, make_embedded
from vanillabo.bo import BOConfig, Problem, incumbent, run, simple_regret, sobol_search
from vanillabo.exceptions import ContractViolation, RunError
from vanillabo.fit import FitConfig
from vanillabo.acquisition import AcqConfig

FAST = dict(acq=AcqConfig(64, 64, 2), fit=FitConfig(n_restarts=2, max_iterations=50))


def quad(x):
    return -float(np.sum((x - 0.3) ** 2))


def test_run_shape_and_phases():
    h = run(Problem(quad, 2), BOConfig(budget=10, seed=1, **FAST))
    assert len(h) == 10
    assert h.n_doe == 5  # ceil(3 * sqrt(2))
    assert [r.iteration for r in h.records] == list(range(10))
    assert all(r.phase == "bo" for r in h.records[5:])
    assert all(r.fit_restarts_used >= 1 for r in h.records[5:])
    assert h.X.min() >= 0 and h.X.max() <= 1


def test_run_is_deterministic():
    p = as_problem(make_embedded("hartmann6", 6, seed=2))
    a = run(p, BOConfig(budget=12, seed=5, **FAST))
    b = run(p, BOConfig(budget=12, seed=5, **FAST))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y_raw, b.y_raw)


def test_budget_equal_to_doe_is_pure_design():
    h = run(Problem(quad, 4), BOConfig(budget=6, seed=0))
    assert h.n_doe == 6 and len(h) == 6


def test_budget_below_doe_rejected():
    with pytest.raises(ContractViolation):
        run(Problem(quad, 4), BOConfig(budget=5))
    with pytest.raises(ContractViolation):
        BOConfig(budget=0)


def test_regret_monotone_and_incumbent():
    p = as_problem(make_embedded("hartmann6", 6, seed=0))
    h = run(p, BOConfig(budget=14, seed=0, **FAST))
    r = simple_regret(h)
    assert np.all(np.diff(r) <= 0) and np.all(r >= 0)
    np.testing.assert_allclose(r, [rec.regret for rec in h.records])
    x, y = incumbent(h)
    assert y == h.y_raw.max()
    inc = np.maximum.accumulate(h.y_raw)
    np.testing.assert_allclose(inc, [rec.incumbent_value for rec in h.records])


def test_distance_bookkeeping():
    h = run(Problem(quad, 2), BOConfig(budget=8, seed=3, **FAST))
    X, y = h.X, h.y_raw
    for t in range(1, len(h)):
        best = int(np.argmax(y[:t]))
        assert h.records[t].dist_to_incumbent == pytest.approx(np.linalg.norm(X[t] - X[best]))
        assert h.records[t].min_dist_to_data == pytest.approx(np.min(np.linalg.norm(X[:t] - X[t], axis=1)))
        assert h.records[t].min_dist_to_data <= h.records[t].dist_to_incumbent + 1e-15


def test_regret_needs_optimum():
    h = sobol_search(Problem(quad, 2), 4)
    with pytest.raises(ContractViolation):
        simple_regret(h)
    assert simple_regret(h, known_optimum=0.0)[-1] >= 0


def test_objective_failure_keeps_history():
    calls = []

    def flaky(x):
        calls.append(1)
        if len(calls) > 6:
            raise RuntimeError("simulator crashed")
        return quad(x)

    with pytest.raises(RunError) as info:
        run(Problem(flaky, 2), BOConfig(budget=10, **FAST))
    assert len(info.value.history) == 6


def test_bo_improves_on_sobol_quickly():
    p = as_problem(make_embedded("hartmann6", 6, seed=0))
    bo = run(p, BOConfig(budget=40, seed=0))
    base = sobol_search(p, 40, seed=0)
    assert bo.records[-1].regret < base.records[-1].regret
