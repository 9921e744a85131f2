"""Quasi-random and local random sampling on the unit cube."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.stats import qmc

from .exceptions import ContractViolation

SOBOL_BITS = 32
MAX_SOBOL_DIM = 21201  # size of scipy's Joe-Kuo direction-number table


class SobolStream:
    """Sobol sequence with an optional per-seed digital shift.

    The unshifted stream (``seed=None``) is the plain binary Sobol
    sequence starting at the origin. With a seed, every coordinate's
    integer representation is XOR-ed with a fixed random word, which keeps
    the dyadic stratification of the net while giving each seed a distinct
    point set.
    """

    def __init__(self, dim: int, seed: int | None = None, index: int = 0):
        if dim < 1:
            raise ContractViolation(f"Sobol dimension must be >= 1, got {dim}")
        if dim > MAX_SOBOL_DIM:
            raise ContractViolation(
                f"Sobol dimension {dim} exceeds the direction-number table ({MAX_SOBOL_DIM})"
            )
        self.dim = dim
        self.seed = seed
        self.index = index
        self._engine = qmc.Sobol(dim, scramble=False, bits=SOBOL_BITS)
        if index:
            self._engine.fast_forward(index)
        if seed is None:
            self._shift = np.zeros(dim, dtype=np.uint64)
        else:
            rng = np.random.default_rng(seed)
            self._shift = rng.integers(0, 2**SOBOL_BITS, size=dim, dtype=np.uint64)

    def draw(self, n: int) -> np.ndarray:
        if n < 1:
            raise ContractViolation(f"need n >= 1 Sobol points, got {n}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            base = self._engine.random(n)
        self.index += n
        ints = np.rint(base * 2.0**SOBOL_BITS).astype(np.uint64)
        return (ints ^ self._shift).astype(float) / 2.0**SOBOL_BITS

    def clone(self, offset: int = 0) -> "SobolStream":
        """Independent copy positioned ``offset`` points past this stream."""
        return SobolStream(self.dim, self.seed, self.index + offset)


def sobol(n: int, dim: int, seed: int | None = None) -> np.ndarray:
    """First ``n`` points of the (digitally shifted) Sobol sequence, in [0, 1)."""
    return SobolStream(dim, seed).draw(n)


def doe_size(dim: int) -> int:
    """Initial design size, ceil(3 * sqrt(D))."""
    if dim < 1:
        raise ContractViolation(f"dimension must be >= 1, got {dim}")
    root = math.isqrt(dim)
    if root * root == dim:
        return 3 * root
    return math.ceil(3.0 * math.sqrt(dim))


def gaussian_around(center, scale, n: int, seed=None) -> np.ndarray:
    """``n`` Gaussian perturbations of ``center``, clipped to the unit cube.

    ``scale`` is a per-coordinate standard deviation (scalar or vector).
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.min() < 0 or center.max() > 1:
        raise ContractViolation("center must lie in the unit cube")
    scale = np.broadcast_to(np.asarray(scale, dtype=float), center.shape)
    if np.any(scale < 0):
        raise ContractViolation("scale must be non-negative")
    rng = np.random.default_rng(seed)
    pts = center + scale * rng.standard_normal((n, center.size))
    return np.clip(pts, 0.0, 1.0)
