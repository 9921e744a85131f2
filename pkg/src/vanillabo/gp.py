"""Exact GP regression with ARD stationary kernels.

Covers Gram matrices for the squared-exponential (RBF) and Matérn-5/2
families, Cholesky-based posterior inference, and the log marginal
likelihood together with its gradient in raw (log-transformed) parameter
space. Raw parameter layout, used throughout the package::

    [log l_1, ..., log l_D, log sf2, log noise, c]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .exceptions import ContractViolation, NumericalError

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2.0 * math.pi)

JITTER_START = 1e-8
JITTER_MAX = 1e-4


class KernelFamily(str, Enum):
    RBF = "rbf"
    MATERN52 = "matern52"


@dataclass(frozen=True)
class KernelSpec:
    dim: int
    family: KernelFamily = KernelFamily.MATERN52

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ContractViolation(f"kernel dimension must be >= 1, got {self.dim}")
        object.__setattr__(self, "family", KernelFamily(self.family))


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Kernel, likelihood and mean hyperparameters of one GP."""

    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 1e-4
    mean_constant: float = 0.0

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=float).reshape(-1)
        if ls.size == 0 or not np.all(ls > 0) or not np.all(np.isfinite(ls)):
            raise ContractViolation("lengthscales must be finite and strictly positive")
        if not self.signal_variance > 0:
            raise ContractViolation("signal variance must be > 0")
        if not self.noise_variance >= 0:
            raise ContractViolation("noise variance must be >= 0")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "mean_constant", float(self.mean_constant))

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def to_raw(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.concatenate(
                [
                    np.log(self.lengthscales),
                    [math.log(self.signal_variance)],
                    [np.log(self.noise_variance)],
                    [self.mean_constant],
                ]
            )

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> "Hyperparameters":
        raw = np.asarray(raw, dtype=float)
        d = raw.size - 3
        return cls(
            lengthscales=np.exp(raw[:d]),
            signal_variance=float(np.exp(raw[d])),
            noise_variance=float(np.exp(raw[d + 1])),
            mean_constant=float(raw[d + 2]),
        )

    def __eq__(self, other):
        if not isinstance(other, Hyperparameters):
            return NotImplemented
        return (
            np.array_equal(self.lengthscales, other.lengthscales)
            and self.signal_variance == other.signal_variance
            and self.noise_variance == other.noise_variance
            and self.mean_constant == other.mean_constant
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs in the unit cube and standardized targets.

    ``y_mean`` and ``y_scale`` map standardized targets back to raw ones:
    ``raw = y * y_scale + y_mean``.
    """

    X: np.ndarray
    y: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise ContractViolation(f"{X.shape[0]} inputs but {y.size} targets")
        if X.size and (X.min() < -1e-12 or X.max() > 1 + 1e-12):
            raise ContractViolation("dataset inputs must lie in the unit cube")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def _check_lengths(x, x2, ls):
    if not (x.shape[-1] == x2.shape[-1] == ls.shape[-1]):
        raise ContractViolation(
            f"dimension mismatch: {x.shape[-1]}, {x2.shape[-1]}, {ls.shape[-1]}"
        )


def ard_distance(x, x2, lengthscales) -> float:
    """Lengthscale-normalised Euclidean distance between two points."""
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    ls = np.asarray(lengthscales, dtype=float).reshape(-1)
    _check_lengths(x, x2, ls)
    return float(np.sqrt(np.sum(((x - x2) / ls) ** 2)))


def scaled_sqdist(X1: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Pairwise squared ARD distances, shape (len(X1), len(X2))."""
    X1 = np.atleast_2d(X1)
    X2 = np.atleast_2d(X2)
    _check_lengths(X1, X2, lengthscales)
    A = X1 / lengthscales
    B = X2 / lengthscales
    r2 = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(r2, 0.0)


def kernel_from_sqdist(family: KernelFamily, r2: np.ndarray, signal_variance: float):
    """Return (k, g) where k is the covariance and g = -2 dk/d(r^2).

    ``g`` is what every lengthscale and input gradient needs: for the ARD
    distance, ``dk/dx_i = -g * (x_i - x'_i) / l_i^2``.
    """
    if family is KernelFamily.RBF:
        k = signal_variance * np.exp(-0.5 * r2)
        return k, k
    r = np.sqrt(r2)
    e = np.exp(-SQRT5 * r)
    k = signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e
    g = signal_variance * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    return k, g


def kernel_eval(spec: KernelSpec, hp: Hyperparameters, x, x2) -> float:
    r = ard_distance(x, x2, hp.lengthscales)
    k, _ = kernel_from_sqdist(spec.family, np.array(r * r), hp.signal_variance)
    return float(k)


def gram(spec: KernelSpec, hp: Hyperparameters, X1: np.ndarray, X2: np.ndarray | None = None):
    X2 = X1 if X2 is None else X2
    k, _ = kernel_from_sqdist(
        spec.family, scaled_sqdist(X1, X2, hp.lengthscales), hp.signal_variance
    )
    return k


def cholesky_with_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``A``, adding diagonal jitter only on failure.

    Jitter starts at 1e-8 and grows tenfold up to 1e-4; past that the
    matrix is declared unfactorable.
    """
    try:
        return sla.cholesky(A, lower=True, check_finite=True), 0.0
    except (sla.LinAlgError, ValueError):
        pass
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix contains non-finite entries")
    jitter = JITTER_START
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return sla.cholesky(A + jitter * eye, lower=True), jitter
        except sla.LinAlgError:
            jitter *= 10.0
    try:
        cond = float(np.linalg.cond(A))
    except np.linalg.LinAlgError:
        cond = float("inf")
    raise NumericalError(
        f"Cholesky failed with jitter up to {JITTER_MAX:g} (condition number {cond:.3e})",
        condition=cond,
        jitter=JITTER_MAX,
    )


class GPModel:
    """A GP conditioned on a dataset; immutable once built.

    Parameters
    ----------
    kernel : KernelSpec
    hp : Hyperparameters
    data : Dataset
        May be empty, in which case the model is the prior.
    """

    def __init__(self, kernel: KernelSpec, hp: Hyperparameters, data: Dataset):
        if hp.dim != kernel.dim:
            raise ContractViolation(f"{hp.dim} lengthscales for a {kernel.dim}-D kernel")
        if data.n and data.X.shape[1] != kernel.dim:
            raise ContractViolation("dataset dimension does not match kernel")
        self.kernel = kernel
        self.hp = hp
        self.data = data
        n = data.n
        if n:
            r2 = scaled_sqdist(data.X, data.X, hp.lengthscales)
            Kf, G = kernel_from_sqdist(kernel.family, r2, hp.signal_variance)
            Kf = 0.5 * (Kf + Kf.T)
            K = Kf + hp.noise_variance * np.eye(n)
            chol, jitter = cholesky_with_jitter(K)
            resid = data.y - hp.mean_constant
            alpha = sla.cho_solve((chol, True), resid)
        else:
            Kf = G = K = chol = np.zeros((0, 0))
            jitter = 0.0
            alpha = np.zeros(0)
        for arr in (Kf, G, chol, alpha):
            arr.setflags(write=False)
        self._Kf = Kf
        self._G = G
        self.chol = chol
        self.alpha = alpha
        self.jitter = jitter

    @property
    def n(self) -> int:
        return self.data.n

    def _cross(self, Xq: np.ndarray):
        r2 = scaled_sqdist(Xq, self.data.X, self.hp.lengthscales)
        return kernel_from_sqdist(self.kernel.family, r2, self.hp.signal_variance)

    def posterior(self, Xq) -> Posterior:
        """Latent posterior mean and variance at the rows of ``Xq``."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.kernel.dim:
            raise ContractViolation("query dimension does not match kernel")
        m = Xq.shape[0]
        prior_var = self.hp.signal_variance
        if not self.n:
            return Posterior(
                np.full(m, self.hp.mean_constant), np.full(m, prior_var)
            )
        Kq, _ = self._cross(Xq)
        mean = self.hp.mean_constant + Kq @ self.alpha
        V = sla.solve_triangular(self.chol, Kq.T, lower=True)
        var = np.maximum(prior_var - (V * V).sum(0), 0.0)
        return Posterior(mean, var)

    def posterior_gradient(self, Xq):
        """Posterior moments and their gradients w.r.t. the query inputs.

        Returns ``(mean, var, dmean, dvar)`` with gradients of shape (m, D).
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        m, d = Xq.shape
        if not self.n:
            return (
                np.full(m, self.hp.mean_constant),
                np.full(m, self.hp.signal_variance),
                np.zeros((m, d)),
                np.zeros((m, d)),
            )
        X = self.data.X
        inv_l2 = 1.0 / self.hp.lengthscales**2
        Kq, G = self._cross(Xq)
        mean = self.hp.mean_constant + Kq @ self.alpha
        V = sla.cho_solve((self.chol, True), Kq.T).T
        var = np.maximum(self.hp.signal_variance - (Kq * V).sum(1), 0.0)
        Ga = G * self.alpha
        dmean = -(Ga.sum(1)[:, None] * Xq - Ga @ X) * inv_l2
        P = G * V
        dvar = 2.0 * (P.sum(1)[:, None] * Xq - P @ X) * inv_l2
        return mean, var, dmean, dvar

    def log_marginal_likelihood(self, with_grad: bool = True):
        """Log evidence and its gradient w.r.t. the raw parameter vector."""
        n = self.n
        d = self.kernel.dim
        if not n:
            return (0.0, np.zeros(d + 3)) if with_grad else 0.0
        resid = self.data.y - self.hp.mean_constant
        value = (
            -0.5 * resid @ self.alpha
            - np.log(np.diag(self.chol)).sum()
            - 0.5 * n * LOG_2PI
        )
        if not with_grad:
            return float(value)
        Kinv = sla.cho_solve((self.chol, True), np.eye(n))
        W = np.outer(self.alpha, self.alpha) - Kinv
        X = self.data.X
        M = W * self._G
        grad_ls = ((M.sum(1) @ (X * X)) - (X * (M @ X)).sum(0)) / self.hp.lengthscales**2
        grad_sf = 0.5 * np.sum(W * self._Kf)
        grad_noise = 0.5 * self.hp.noise_variance * np.trace(W)
        grad_c = self.alpha.sum()
        return float(value), np.concatenate([grad_ls, [grad_sf, grad_noise, grad_c]])
