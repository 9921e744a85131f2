"""Information gain and maximal-information-gain curves for GP model classes.

Every model class reduces to an effective covariance over candidate
points; information gain of a point set is ``0.5 * log det(I + K / noise)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .exceptions import ContractViolation
from .gp import Hyperparameters, KernelFamily, KernelSpec, cholesky_with_jitter, gram
from .sampling import sobol

POOL_FACTOR = 10
POOL_CAP = 50_000
MIG_CSV_COLUMNS = ("variant", "D", "n", "gamma_nats", "sigma_eps2", "seed")


class Variant(str, Enum):
    INDEPENDENT = "independent"
    FIXED = "fixed"
    SCALED = "scaled"
    ADDGP = "addgp"
    LOCAL = "local"
    REMBO = "rembo"


@dataclass(frozen=True)
class ModelClassSpec:
    """A family of GP priors whose complexity is compared across dimensions.

    ``lengthscale`` is the fixed lengthscale for FIXED / LOCAL / ADDGP and
    the base lengthscale for SCALED and REMBO.
    """

    variant: Variant
    family: KernelFamily = KernelFamily.RBF
    signal_variance: float = 1.0
    noise_variance: float = 1.0
    lengthscale: float = 0.5
    reference_dim: int = 6
    shrink_factor: float = 0.4
    effective_dim: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "family", KernelFamily(self.family))
        for name in ("signal_variance", "noise_variance", "lengthscale", "shrink_factor"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"{name} must be > 0")
        if self.reference_dim < 1 or self.effective_dim < 1:
            raise ContractViolation("reference_dim and effective_dim must be >= 1")


@dataclass(frozen=True, eq=False)
class EffectiveModel:
    """Effective prior covariance of a model class over its candidate space.

    ``input_dim`` is where candidates live: the ambient dimension for all
    variants except REMBO, whose candidates are embedded points.
    """

    variant: Variant
    input_dim: int
    gram: Callable[..., np.ndarray]  # (A, B=None) -> covariance
    signal_variance: float
    noise_variance: float
    groups: tuple[tuple[int, ...], ...] = ()
    candidate_side: float = 1.0
    lengthscales: np.ndarray | None = None
    embedding: np.ndarray | None = None

    def information_gain(self, X: np.ndarray) -> float:
        return information_gain(self.gram(X), self.noise_variance)

    def ig_curve(self, X: np.ndarray, counts) -> np.ndarray:
        """IG of the leading ``k`` rows of ``X`` for each ``k`` in ``counts``.

        The Cholesky factor of a leading principal block is the leading
        block of the full factor, so one factorisation serves every k.
        """
        counts = np.asarray(counts, dtype=int)
        diag = _ig_chol_diag(self.gram(X), self.noise_variance)
        cum = np.concatenate([[0.0], np.cumsum(np.log(diag))])
        return cum[counts]


@dataclass(frozen=True)
class MIGCurve:
    counts: np.ndarray
    values: np.ndarray  # nats
    truncated: bool = False


def _ig_chol_diag(K: np.ndarray, noise_variance: float) -> np.ndarray:
    n = K.shape[0]
    if n == 0:
        return np.zeros(0)
    A = np.eye(n) + K / noise_variance
    L, _ = cholesky_with_jitter(0.5 * (A + A.T))
    return np.diag(L)


def information_gain(K, noise_variance: float) -> float:
    """0.5 * log det(I + K / noise_variance), in nats."""
    if not noise_variance > 0:
        raise ContractViolation("noise variance must be > 0")
    K = np.asarray(K, dtype=float)
    if K.size == 0:
        return 0.0
    K = np.atleast_2d(K)
    if K.shape[0] != K.shape[1]:
        raise ContractViolation("Gram matrix must be square")
    return float(np.sum(np.log(_ig_chol_diag(K, noise_variance))))


def addgp_groups(dim: int, rng) -> list[list[int]]:
    """Random additive decomposition built one dimension at a time.

    Each dimension joins one of the existing groups or a fresh one, all
    options equally likely.
    """
    groups: list[list[int]] = []
    for i in range(dim):
        choice = int(rng.integers(0, len(groups) + 1))
        if choice == len(groups):
            groups.append([i])
        else:
            groups[choice].append(i)
    return groups


def _independent_gram(sf2):
    def k(A, B=None):
        if B is None:
            return sf2 * np.eye(len(A))
        return sf2 * np.all(A[:, None, :] == B[None, :, :], axis=2).astype(float)

    return k


def _stationary_gram(family, lengthscales, sf2, transform=None):
    spec = KernelSpec(len(lengthscales), family)
    hp = Hyperparameters(lengthscales, sf2, 0.0)

    def k(A, B=None):
        if transform is not None:
            A = transform(A)
            B = None if B is None else transform(B)
        return gram(spec, hp, A, B)

    return k


def _additive_gram(family, groups, ell, sf2):
    # total prior variance sf2 is split evenly across groups
    parts = [
        (np.array(g), _stationary_gram(family, np.full(len(g), ell), sf2 / len(groups)))
        for g in groups
    ]

    def k(A, B=None):
        return sum(kg(A[:, g], None if B is None else B[:, g]) for g, kg in parts)

    return k


def build_model_class(spec: ModelClassSpec, dim: int, seed: int | None = None) -> EffectiveModel:
    """Effective covariance of a model class at ambient dimension ``dim``.

    INDEPENDENT: K = sf2 I.  FIXED: ARD kernel with every l_i = l.
    SCALED: l_i = l * sqrt(D / reference_dim).  LOCAL: fixed-l kernel on a
    centred cube of side shrink_factor * l.  ADDGP: random groups, exact
    additive kernel.  REMBO: effective_dim-D kernel whose lengthscales are
    l divided by the column norms of a Gaussian embedding matrix.
    """
    if dim < 1:
        raise ContractViolation("dimension must be >= 1")
    seed = spec.seed if seed is None else seed
    sf2, noise, ell, fam = spec.signal_variance, spec.noise_variance, spec.lengthscale, spec.family
    v = spec.variant

    if v is Variant.INDEPENDENT:
        return EffectiveModel(v, dim, _independent_gram(sf2), sf2, noise)
    if v is Variant.FIXED:
        ls = np.full(dim, ell)
        return EffectiveModel(v, dim, _stationary_gram(fam, ls, sf2), sf2, noise, lengthscales=ls)
    if v is Variant.SCALED:
        ls = np.full(dim, ell * math.sqrt(dim / spec.reference_dim))
        return EffectiveModel(v, dim, _stationary_gram(fam, ls, sf2), sf2, noise, lengthscales=ls)
    if v is Variant.LOCAL:
        side = spec.shrink_factor * ell
        ls = np.full(dim, ell)
        k = _stationary_gram(fam, ls, sf2, transform=lambda X: 0.5 + (X - 0.5) * side)
        return EffectiveModel(v, dim, k, sf2, noise, candidate_side=side, lengthscales=ls)
    rng = np.random.default_rng(seed)
    if v is Variant.ADDGP:
        groups = addgp_groups(dim, rng)
        k = _additive_gram(fam, groups, ell, sf2)
        return EffectiveModel(v, dim, k, sf2, noise, groups=tuple(tuple(g) for g in groups))
    if v is Variant.REMBO:
        d_e = spec.effective_dim
        if d_e > dim:
            raise ContractViolation(f"embedding dimension {d_e} exceeds ambient dimension {dim}")
        A = rng.standard_normal((dim, d_e)) / math.sqrt(dim)
        ls = ell / np.linalg.norm(A, axis=0)
        k = _stationary_gram(fam, ls, sf2)
        return EffectiveModel(v, d_e, k, sf2, noise, lengthscales=ls, embedding=A)
    raise ContractViolation(f"unknown variant {v}")


def log_grid(n: int, points: int = 25) -> np.ndarray:
    return np.unique(np.round(np.geomspace(1, n, points)).astype(int))


def sobol_mig(spec: ModelClassSpec, dim: int, n: int, seed: int = 0, counts=None) -> MIGCurve:
    """IG of the first k shifted-Sobol points, k on a log grid up to ``n``."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    model = build_model_class(spec, dim)
    counts = log_grid(n) if counts is None else np.asarray(counts, dtype=int)
    X = sobol(int(counts.max()), model.input_dim, seed)
    return MIGCurve(counts, model.ig_curve(X, counts))


def greedy_mig(
    spec: ModelClassSpec, candidate_pool, n: int, dim: int | None = None
) -> MIGCurve:
    """Greedy IG maximisation: repeatedly take the pool point of largest
    posterior variance given the (noisy) selections so far.

    Variances over the pool are downdated by one rank-one update per step.
    ``dim`` is the ambient dimension, needed only when it differs from the
    pool's (REMBO).
    """
    pool = np.atleast_2d(np.asarray(candidate_pool, dtype=float))
    model = build_model_class(spec, pool.shape[1] if dim is None else dim)
    if pool.shape[1] != model.input_dim:
        raise ContractViolation("candidate pool dimension does not match the model")
    size = pool.shape[0]
    steps = min(n, size)
    noise = model.noise_variance
    var = np.full(size, model.signal_variance)
    F = np.zeros((size, steps))
    taken = np.zeros(size, dtype=bool)
    gains = np.zeros(steps)
    for t in range(steps):
        score = np.where(taken, -np.inf, var)
        j = int(np.argmax(score))
        gains[t] = 0.5 * math.log1p(max(var[j], 0.0) / noise)
        taken[j] = True
        kx = model.gram(pool, pool[j : j + 1])[:, 0]
        col = (kx - F[:, :t] @ F[j, :t]) / math.sqrt(max(var[j], 0.0) + noise)
        F[:, t] = col
        var = var - col * col
    return MIGCurve(np.arange(1, steps + 1), np.cumsum(gains), truncated=steps < n)


def default_pool(spec: ModelClassSpec, dim: int, n: int, seed: int = 0) -> np.ndarray:
    model = build_model_class(spec, dim)
    return sobol(min(POOL_FACTOR * n, POOL_CAP), model.input_dim, seed)


def independent_ig(n, signal_variance: float, noise_variance: float):
    """Closed-form IG of n independent points."""
    return 0.5 * np.asarray(n) * math.log1p(signal_variance / noise_variance)


def write_mig_csv(fh, rows) -> None:
    """Rows are (variant, D, n, gamma_nats, sigma_eps2, seed) tuples."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(MIG_CSV_COLUMNS)
    for variant, d, n, gamma, s2, seed in rows:
        w.writerow([variant, d, n, format(float(gamma), ".17g"), format(float(s2), ".17g"), seed])
