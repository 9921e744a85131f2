"""Expected improvement, its stable logarithm, and acquisition optimisation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import erfcx, log_ndtr, ndtr

from .exceptions import AcquisitionError, ContractViolation
from .gp import GPModel
from .sampling import gaussian_around, sobol

_C1 = 0.5 * math.log(2.0 * math.pi)
_C2 = 0.5 * math.log(math.pi / 2.0)
_ASYMPTOTIC_Z = -1e3
VAR_FLOOR = 1e-18


def _npdf(z):
    return np.exp(-0.5 * z * z - _C1)


def _log1mexp(x):
    """log(1 - exp(x)) for x < 0."""
    x = np.asarray(x, dtype=float)
    return np.where(
        x > -math.log(2.0),
        np.log(-np.expm1(np.minimum(x, -1e-300))),
        np.log1p(-np.exp(np.minimum(x, 0.0))),
    )


def log_h(z):
    """log(phi(z) + z * Phi(z)), accurate from z = +inf down to z = -1e6 and beyond.

    For z <= -1 the value is assembled from the scaled complementary
    error function to avoid the cancellation in phi + z*Phi; below -1e3
    the asymptotic Mills-ratio series takes over.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    hi = z > -1.0
    mid = (z <= -1.0) & (z >= _ASYMPTOTIC_Z)
    lo = z < _ASYMPTOTIC_Z
    zh = z[hi]
    out[hi] = np.log(_npdf(zh) + zh * ndtr(zh))
    zm = z[mid]
    out[mid] = -0.5 * zm * zm - _C1 + _log1mexp(np.log(erfcx(-zm / math.sqrt(2.0)) * -zm) + _C2)
    zl = z[lo]
    inv2 = 1.0 / (zl * zl)
    out[lo] = -0.5 * zl * zl - _C1 + np.log(inv2 * (1.0 - 3.0 * inv2 + 15.0 * inv2 * inv2))
    return out


def dlog_h(z):
    """Derivative of log_h: Phi(z) / h(z)."""
    z = np.asarray(z, dtype=float)
    return np.exp(log_ndtr(z) - log_h(z))


def ei(mu, sigma, y_max):
    """Expected improvement over ``y_max`` for a Gaussian N(mu, sigma^2)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ContractViolation("sigma must be non-negative")
    safe = np.where(sigma > 0, sigma, 1.0)
    z = (mu - y_max) / safe
    val = safe * (z * ndtr(z) + _npdf(z))
    out = np.where(sigma > 0, val, np.maximum(mu - y_max, 0.0))
    return out if out.ndim else float(out)


def log_ei(mu, sigma, y_max, with_grad: bool = False):
    """log EI, finite for every sigma > 0.

    With ``with_grad`` also returns the partial derivatives w.r.t. ``mu``
    and ``sigma``.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ContractViolation("log_ei requires sigma > 0")
    z = (mu - y_max) / sigma
    val = np.log(sigma) + log_h(np.atleast_1d(z)).reshape(z.shape)
    if not with_grad:
        return val if val.ndim else float(val)
    dz = dlog_h(np.atleast_1d(z)).reshape(z.shape)
    dmu = dz / sigma
    dsigma = (1.0 - z * dz) / sigma
    if val.ndim == 0:
        return float(val), float(dmu), float(dsigma)
    return val, dmu, dsigma


def z_score(mu, sigma, y_max):
    return (np.asarray(mu) - y_max) / np.asarray(sigma)


def log_ei_at(model: GPModel, X, y_max: float) -> np.ndarray:
    """log EI of the model's latent posterior at each row of ``X``."""
    post = model.posterior(X)
    sigma = np.sqrt(np.maximum(post.variance, VAR_FLOOR))
    return log_ei(post.mean, sigma, y_max)


def log_ei_and_grad(model: GPModel, x, y_max: float):
    """log EI at a single point and its gradient w.r.t. the point."""
    mean, var, dmean, dvar = model.posterior_gradient(np.atleast_2d(x))
    var = max(float(var[0]), VAR_FLOOR)
    sigma = math.sqrt(var)
    val, dmu, dsig = log_ei(float(mean[0]), sigma, y_max, with_grad=True)
    grad = dmu * dmean[0] + dsig * dvar[0] / (2.0 * sigma)
    return val, grad


@dataclass(frozen=True)
class AcqConfig:
    n_global_sobol: int = 512
    n_local_gaussian: int = 512
    n_refine: int = 4
    local_scale: float = 1e-3
    max_refine_iters: int = 50
    gradient_tolerance: float = 1e-6

    def __post_init__(self):
        if self.n_global_sobol < 1 or self.n_local_gaussian < 1 or self.n_refine < 1:
            raise ContractViolation("candidate counts must be positive")
        if self.n_refine > self.n_global_sobol + self.n_local_gaussian:
            raise ContractViolation("n_refine exceeds the number of raw candidates")
        if not self.local_scale > 0:
            raise ContractViolation("local_scale must be > 0")
        if self.max_refine_iters < 1:
            raise ContractViolation("max_refine_iters must be >= 1")


@dataclass(frozen=True)
class AcqResult:
    x: np.ndarray
    log_ei: float
    best_raw_log_ei: float


def optimize_acquisition(
    model: GPModel, y_max: float, incumbent, cfg: AcqConfig | None = None, seed=None
) -> AcqResult:
    """Maximise log EI over the unit cube.

    Scores ``n_global_sobol`` shifted-Sobol points and ``n_local_gaussian``
    perturbations of the incumbent, then polishes the ``n_refine`` best
    with box-constrained L-BFGS and returns the best point found.
    """
    cfg = cfg or AcqConfig()
    dim = model.kernel.dim
    incumbent = np.asarray(incumbent, dtype=float).reshape(-1)
    if incumbent.size != dim:
        raise ContractViolation("incumbent dimension does not match the model")
    rng = np.random.default_rng(seed)
    sobol_seed = int(rng.integers(0, 2**31 - 1))
    cands = np.vstack(
        [
            sobol(cfg.n_global_sobol, dim, sobol_seed),
            gaussian_around(incumbent, cfg.local_scale, cfg.n_local_gaussian, rng),
        ]
    )
    post = model.posterior(cands)
    if not np.any(post.variance > VAR_FLOOR):
        raise AcquisitionError("posterior variance is zero at every candidate")
    vals = log_ei(post.mean, np.sqrt(np.maximum(post.variance, VAR_FLOOR)), y_max)
    order = np.argsort(-vals, kind="stable")
    best_raw = float(vals[order[0]])
    best_x, best_val = cands[order[0]].copy(), best_raw

    def neg(x):
        v, g = log_ei_and_grad(model, x, y_max)
        return -v, -g

    bounds = [(0.0, 1.0)] * dim
    for idx in order[: cfg.n_refine]:
        res = minimize(
            neg,
            cands[idx],
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_refine_iters, "gtol": cfg.gradient_tolerance},
        )
        x = np.clip(res.x, 0.0, 1.0)
        v = float(log_ei_at(model, x[None], y_max)[0])
        if v > best_val:
            best_x, best_val = x, v
    return AcqResult(best_x, best_val, best_raw)
