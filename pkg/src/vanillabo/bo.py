"""The vanilla BO loop: Sobol DoE, then standardize -> fit -> LogEI -> query."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .acquisition import AcqConfig, optimize_acquisition
from .exceptions import ContractViolation, RunError
from .fit import FitConfig, HyperpriorSpec, fit, standardize
from .gp import Dataset, GPModel, KernelFamily, KernelSpec
from .sampling import doe_size, sobol


@dataclass
class Problem:
    """A black box on the unit cube, maximised.

    ``objective`` returns the noiseless value; the engine adds Gaussian
    noise of standard deviation ``noise_std`` to form observations.
    """

    objective: Callable[[np.ndarray], float]
    dim: int
    known_optimum: float | None = None
    noise_std: float = 0.0
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BOConfig:
    budget: int
    priors: HyperpriorSpec = field(default_factory=HyperpriorSpec)
    acq: AcqConfig = field(default_factory=AcqConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    kernel: KernelFamily = KernelFamily.MATERN52
    seed: int = 0
    n_init: int | None = None  # None -> ceil(3 sqrt(D))

    def __post_init__(self):
        if self.budget < 1:
            raise ContractViolation(f"budget must be positive, got {self.budget}")
        if self.n_init is not None and self.n_init < 1:
            raise ContractViolation("n_init must be positive")

    def init_size(self, dim: int) -> int:
        return self.n_init if self.n_init is not None else doe_size(dim)


@dataclass
class IterationRecord:
    iteration: int
    x: np.ndarray
    y_raw: float
    y_true: float
    incumbent_value: float
    regret: float
    dist_to_incumbent: float
    min_dist_to_data: float
    phase: str  # "doe" or "bo"
    ell_median: float = math.nan
    sigma_eps2: float = math.nan
    mean_c: float = math.nan
    signal_variance: float = math.nan
    fit_restarts_used: int = 0
    wall_ms: float = 0.0


@dataclass
class RunHistory:
    dim: int
    known_optimum: float | None = None
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def X(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.dim))
        return np.array([r.x for r in self.records])

    @property
    def y_raw(self) -> np.ndarray:
        return np.array([r.y_raw for r in self.records])

    @property
    def y_true(self) -> np.ndarray:
        return np.array([r.y_true for r in self.records])

    @property
    def n_doe(self) -> int:
        return sum(r.phase == "doe" for r in self.records)

    def append(self, x, y_raw, y_true, phase, wall_ms=0.0, fit_result=None):
        x = np.asarray(x, dtype=float)
        prev = self.X
        if len(prev):
            inc_idx = int(np.argmax(self.y_raw))
            dist_inc = float(np.linalg.norm(x - prev[inc_idx]))
            min_dist = float(np.min(np.linalg.norm(prev - x, axis=1)))
            inc_val = max(self.records[-1].incumbent_value, y_raw)
            best_true = max(np.max(self.y_true), y_true)
        else:
            dist_inc = min_dist = math.nan
            inc_val = y_raw
            best_true = y_true
        regret = (
            max(self.known_optimum - best_true, 0.0) if self.known_optimum is not None else math.nan
        )
        rec = IterationRecord(
            iteration=len(self.records),
            x=x,
            y_raw=float(y_raw),
            y_true=float(y_true),
            incumbent_value=float(inc_val),
            regret=float(regret),
            dist_to_incumbent=dist_inc,
            min_dist_to_data=min_dist,
            phase=phase,
            wall_ms=float(wall_ms),
        )
        if fit_result is not None:
            hp = fit_result.hp
            rec.ell_median = float(np.median(hp.lengthscales))
            rec.sigma_eps2 = hp.noise_variance
            rec.mean_c = hp.mean_constant
            rec.signal_variance = hp.signal_variance
            rec.fit_restarts_used = fit_result.restarts_used
        self.records.append(rec)
        return rec


def incumbent(history: RunHistory):
    """Best observed point and its raw value; ties go to the earliest."""
    if not len(history):
        raise ContractViolation("incumbent of an empty history")
    idx = int(np.argmax(history.y_raw))
    return history.records[idx].x, history.records[idx].y_raw


def simple_regret(history: RunHistory, known_optimum: float | None = None) -> np.ndarray:
    """known_optimum minus the best noiseless value found up to each iteration."""
    opt = history.known_optimum if known_optimum is None else known_optimum
    if opt is None:
        raise ContractViolation("simple regret needs a known optimum")
    y_true = history.y_true
    if y_true.size == 0 or np.any(np.isnan(y_true)):
        raise ContractViolation("simple regret needs noiseless values for every query")
    return np.maximum(opt - np.maximum.accumulate(y_true), 0.0)


def _observe(problem: Problem, x, noise_rng):
    y_true = float(problem.objective(x))
    eps = noise_rng.standard_normal()
    return y_true + problem.noise_std * eps, y_true


def _check_query(x, dim):
    if x.shape != (dim,) or np.any(~np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise ContractViolation("query outside the unit cube")


def run(problem: Problem, cfg: BOConfig, progress: Callable | None = None) -> RunHistory:
    """Run vanilla BO for ``cfg.budget`` evaluations, deterministically in ``cfg.seed``."""
    dim = problem.dim
    n_init = cfg.init_size(dim)
    if cfg.budget < n_init:
        raise ContractViolation(f"budget {cfg.budget} is below the initial design size {n_init}")
    kernel = KernelSpec(dim, cfg.kernel)
    history = RunHistory(dim, problem.known_optimum)
    noise_rng = np.random.default_rng([cfg.seed, 7919])

    def evaluate(x, phase, t0, fit_result=None):
        try:
            y_raw, y_true = _observe(problem, x, noise_rng)
        except Exception as exc:
            raise RunError(f"objective failed at iteration {len(history)}: {exc}", history) from exc
        rec = history.append(
            x, y_raw, y_true, phase, (time.perf_counter() - t0) * 1e3, fit_result
        )
        if progress is not None:
            progress(rec)

    for x in sobol(n_init, dim, cfg.seed):
        evaluate(x, "doe", time.perf_counter())

    while len(history) < cfg.budget:
        t0 = time.perf_counter()
        t = len(history)
        z, _, _ = standardize(history.y_raw)
        data = Dataset(history.X, z)
        try:
            result = fit(data, kernel, cfg.priors, cfg.fit, seed=[cfg.seed, t, 0])
            model = GPModel(kernel, result.hp, data)
            inc_idx = int(np.argmax(z))
            acq = optimize_acquisition(
                model, float(z[inc_idx]), history.X[inc_idx], cfg.acq, seed=[cfg.seed, t, 1]
            )
        except Exception as exc:
            raise RunError(f"model step failed at iteration {t}: {exc}", history) from exc
        x = acq.x
        _check_query(x, dim)
        evaluate(x, "bo", t0, result)
    return history


def sobol_search(problem: Problem, budget: int, seed: int = 0) -> RunHistory:
    """Baseline: evaluate the first ``budget`` shifted-Sobol points."""
    history = RunHistory(problem.dim, problem.known_optimum)
    noise_rng = np.random.default_rng([seed, 7919])
    for x in sobol(budget, problem.dim, seed):
        y_raw, y_true = _observe(problem, x, noise_rng)
        history.append(x, y_raw, y_true, "doe")
    return history
