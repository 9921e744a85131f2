"""Hyperpriors and MAP / MLE fitting of GP hyperparameters.

All optimisation happens in raw (log) space. Prior densities are those of
the natural parameter (lengthscale, variance) evaluated at ``exp(raw)``,
without a change-of-variables term, so the prior mode in natural units is
what the optimiser is pulled towards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.special import gammaln

from .exceptions import ContractViolation, FitError, NumericalError
from .gp import Dataset, GPModel, Hyperparameters, KernelSpec

LOG_2PI = math.log(2.0 * math.pi)

# Natural-unit box for the optimiser: lengthscales/signal variance in
# [1e-4, 1e4], noise variance in [1e-6, 10].
LOG_BOUND = math.log(1e4)
NOISE_BOUNDS = (math.log(1e-6), math.log(10.0))
_FAIL_VALUE = 1e25


@dataclass(frozen=True)
class LogNormal:
    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractViolation("LogNormal scale must be > 0")

    def for_dim(self, dim: int) -> "LogNormal":
        return self

    @property
    def mode(self) -> float:
        return math.exp(self.loc - self.scale**2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.logpdf_raw(np.log(x))

    def logpdf_raw(self, theta):
        """Log density of ``x = exp(theta)`` (natural units) and d/dtheta."""
        z = (theta - self.loc) / self.scale
        val = -theta - math.log(self.scale) - 0.5 * LOG_2PI - 0.5 * z * z
        return val, -1.0 - z / self.scale

    def sample(self, rng, size):
        return np.exp(self.loc + self.scale * rng.standard_normal(size))


@dataclass(frozen=True)
class ScaledLogNormal:
    """LogNormal lengthscale prior whose location grows by log(D)/2."""

    mu0: float = math.sqrt(2.0)
    sigma0: float = math.sqrt(3.0)

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ContractViolation("sigma0 must be > 0")

    def for_dim(self, dim: int) -> LogNormal:
        return scaled_lengthscale_prior(dim, self.mu0, self.sigma0)


@dataclass(frozen=True)
class Gamma:
    """Gamma(shape, rate). With ``scale_with_dim`` the rate becomes rate/sqrt(D)."""

    alpha: float
    beta: float
    scale_with_dim: bool = False

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ContractViolation("Gamma parameters must be > 0")

    def for_dim(self, dim: int) -> "Gamma":
        if not self.scale_with_dim:
            return self
        return Gamma(self.alpha, self.beta / math.sqrt(dim))

    @property
    def mode(self) -> float:
        return (self.alpha - 1.0) / self.beta if self.alpha > 1 else self.alpha / self.beta

    def logpdf(self, x):
        return self.logpdf_raw(np.log(np.asarray(x, dtype=float)))

    def logpdf_raw(self, theta):
        x = np.exp(theta)
        a, b = self.alpha, self.beta
        val = a * math.log(b) - gammaln(a) + (a - 1.0) * theta - b * x
        return val, (a - 1.0) - b * x

    def sample(self, rng, size):
        return rng.gamma(self.alpha, 1.0 / self.beta, size)


@dataclass(frozen=True)
class Fixed:
    """Holds a hyperparameter at ``value``; contributes nothing to the objective."""

    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ContractViolation("fixed value must be >= 0")

    def for_dim(self, dim: int) -> "Fixed":
        return self

    @property
    def mode(self) -> float:
        return self.value


def scaled_lengthscale_prior(dim: int, mu0: float, sigma0: float) -> LogNormal:
    """Per-dimension lengthscale prior LN(mu0 + log(D)/2, sigma0)."""
    if dim < 1:
        raise ContractViolation(f"dimension must be >= 1, got {dim}")
    return LogNormal(mu0 + 0.5 * math.log(dim), sigma0)


DEFAULT_NOISE_PRIOR = LogNormal(-4.0, 1.0)
LEARNED_SIGNAL_PRIOR = LogNormal(0.0, 1.0)


@dataclass(frozen=True)
class HyperpriorSpec:
    """Priors over one GP's hyperparameters. The constant mean is always flat."""

    lengthscale: ScaledLogNormal | LogNormal | Gamma | Fixed = field(default_factory=ScaledLogNormal)
    noise: LogNormal | Gamma | Fixed = DEFAULT_NOISE_PRIOR
    signal_variance: LogNormal | Gamma | Fixed = Fixed(1.0)

    @property
    def learns_signal_variance(self) -> bool:
        return not isinstance(self.signal_variance, Fixed)


class FitMode(str, Enum):
    MAP = "map"
    MLE = "mle"


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 4
    max_iterations: int = 200
    gradient_tolerance: float = 1e-5
    mode: FitMode = FitMode.MAP

    def __post_init__(self):
        if self.n_restarts < 1:
            raise ContractViolation("n_restarts must be >= 1")
        if self.max_iterations < 1:
            raise ContractViolation("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ContractViolation("gradient_tolerance must be > 0")
        object.__setattr__(self, "mode", FitMode(self.mode))


@dataclass(frozen=True)
class FitResult:
    hp: Hyperparameters
    objective_value: float
    converged: bool
    restart_index: int
    restarts_used: int = 1


def _log_prior(priors: HyperpriorSpec, dim: int, raw: np.ndarray):
    """Sum of log prior densities over learned parameters, with raw gradient."""
    grad = np.zeros_like(raw)
    total = 0.0
    ls_prior = priors.lengthscale.for_dim(dim)
    slots = [
        (ls_prior, slice(0, dim)),
        (priors.signal_variance.for_dim(dim), slice(dim, dim + 1)),
        (priors.noise.for_dim(dim), slice(dim + 1, dim + 2)),
    ]
    for prior, sl in slots:
        if isinstance(prior, Fixed):
            continue
        val, g = prior.logpdf_raw(raw[sl])
        total += float(np.sum(val))
        grad[sl] = g
    return total, grad


def map_objective(model: GPModel, priors: HyperpriorSpec, mode: FitMode | str = FitMode.MAP):
    """Log marginal likelihood plus log hyperprior (MAP) or alone (MLE).

    Returns ``(value, gradient)`` with the gradient over the full raw
    parameter vector; entries of fixed hyperparameters are zero.
    """
    mode = FitMode(mode)
    dim = model.kernel.dim
    value, grad = model.log_marginal_likelihood(with_grad=True)
    grad = grad.copy()
    if mode is FitMode.MAP:
        lp, lg = _log_prior(priors, dim, model.hp.to_raw())
        value += lp
        grad += lg
    for idx in _fixed_indices(priors, dim):
        grad[idx] = 0.0
    if not np.isfinite(value):
        raise NumericalError("non-finite MAP objective")
    return value, grad


def _fixed_indices(priors: HyperpriorSpec, dim: int) -> list[int]:
    idx = []
    if isinstance(priors.lengthscale, Fixed):
        idx.extend(range(dim))
    if isinstance(priors.signal_variance, Fixed):
        idx.append(dim)
    if isinstance(priors.noise, Fixed):
        idx.append(dim + 1)
    return idx


def _initial_points(priors: HyperpriorSpec, dim: int, n: int, rng) -> list[np.ndarray]:
    ls = priors.lengthscale.for_dim(dim)
    sf = priors.signal_variance.for_dim(dim)
    nz = priors.noise.for_dim(dim)

    def draw(prior, size):
        if isinstance(prior, Fixed):
            return np.full(size, prior.value)
        return prior.sample(rng, size)

    with np.errstate(divide="ignore"):
        starts = [
            np.log(np.concatenate([np.full(dim, ls.mode), [sf.mode], [nz.mode], [1.0]]))
        ]
        for _ in range(n - 1):
            natural = np.concatenate([draw(ls, dim), draw(sf, 1), draw(nz, 1), [1.0]])
            starts.append(np.log(natural))
    for s in starts:
        s[-1] = 0.0  # constant mean starts at the standardized data mean
    return starts


def _assemble(raw: np.ndarray, priors: HyperpriorSpec, dim: int) -> Hyperparameters:
    """Hyperparameters from raw values, keeping fixed entries bit-exact."""
    ls = priors.lengthscale
    sf = priors.signal_variance
    nz = priors.noise
    return Hyperparameters(
        lengthscales=np.full(dim, ls.value) if isinstance(ls, Fixed) else np.exp(raw[:dim]),
        signal_variance=sf.value if isinstance(sf, Fixed) else math.exp(raw[dim]),
        noise_variance=nz.value if isinstance(nz, Fixed) else math.exp(raw[dim + 1]),
        mean_constant=float(raw[dim + 2]),
    )


def fit(
    data: Dataset,
    kernel: KernelSpec,
    priors: HyperpriorSpec | None = None,
    cfg: FitConfig | None = None,
    seed=None,
) -> FitResult:
    """Maximise the MAP (or MLE) objective over several restarts.

    The first restart begins at the prior mode, the rest at prior draws.
    Each restart runs L-BFGS-B over the free raw parameters; the best
    objective wins, ties going to the lowest restart index.
    """
    priors = priors or HyperpriorSpec()
    cfg = cfg or FitConfig()
    if data.n < 2:
        raise ContractViolation(f"fit needs at least 2 observations, got {data.n}")
    dim = kernel.dim
    rng = np.random.default_rng(seed)
    fixed = set(_fixed_indices(priors, dim))
    free = np.array([i for i in range(dim + 3) if i not in fixed])
    bounds_all = (
        [(-LOG_BOUND, LOG_BOUND)] * dim
        + [(-LOG_BOUND, LOG_BOUND), NOISE_BOUNDS, (None, None)]
    )
    bounds = [bounds_all[i] for i in free]
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])

    def negobj(theta, base):
        raw = base.copy()
        raw[free] = theta
        try:
            model = GPModel(kernel, _assemble(raw, priors, dim), data)
            val, grad = map_objective(model, priors, cfg.mode)
        except (NumericalError, ContractViolation):
            return _FAIL_VALUE, np.zeros_like(theta)
        return -val, -grad[free]

    best = None
    used = 0
    for i, start in enumerate(_initial_points(priors, dim, cfg.n_restarts, rng)):
        base = start.copy()
        x0 = np.clip(start[free], lo, hi)
        if negobj(x0, base)[0] >= _FAIL_VALUE:
            continue
        res = minimize(
            negobj,
            x0,
            args=(base,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_iterations, "gtol": cfg.gradient_tolerance},
        )
        value = -float(res.fun)
        if not np.isfinite(value) or res.fun >= _FAIL_VALUE:
            continue
        used += 1
        raw = base.copy()
        raw[free] = res.x
        candidate = FitResult(_assemble(raw, priors, dim), value, bool(res.success), i)
        if best is None or value > best.objective_value:
            best = candidate
    if best is None:
        raise FitError("all restarts failed to produce a finite objective", best=None)
    return FitResult(best.hp, best.objective_value, best.converged, best.restart_index, used)


def signal_variance_hat(y, model: GPModel) -> float:
    """Closed-form optimal signal variance (1/n) y^T K^-1 y.

    ``model`` must have unit signal variance; its factor (kernel plus
    noise) supplies K.
    """
    if model.hp.signal_variance != 1.0:
        raise ContractViolation("signal_variance_hat expects a model with unit signal variance")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != model.n:
        raise ContractViolation("target length does not match the model")
    if not np.all(np.isfinite(model.chol)):
        raise NumericalError("model factorization is not finite")
    sol = sla.cho_solve((model.chol, True), y)
    return max(float(y @ sol) / y.size, 0.0)


def standardize(raw_y):
    """Zero-mean, unit-sample-std targets. Returns ``(z, mean, scale)``.

    Constant (or single-element) input maps to zeros with scale 1.
    """
    raw_y = np.asarray(raw_y, dtype=float).reshape(-1)
    if raw_y.size < 1:
        raise ContractViolation("cannot standardize an empty vector")
    mean = float(raw_y.mean())
    scale = float(raw_y.std(ddof=1)) if raw_y.size > 1 else 0.0
    if not scale > 0:
        return np.zeros_like(raw_y), mean, 1.0
    return (raw_y - mean) / scale, mean, scale
