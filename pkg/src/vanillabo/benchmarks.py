"""Axis-aligned synthetic benchmarks embedded in a larger ambient space.

Objectives are exposed in maximisation form: the standard Levy and
Hartmann-6 minimisation problems are negated. Points handed to the
evaluators live in the unit cube and are mapped affinely onto the native
search box; only the active coordinates influence the value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ContractViolation

AMBIENT_DIMS = (10, 25, 100, 300, 1000)
NOISE_STD = 0.01

LEVY_BOUNDS = np.array([[-10.0, 5.0], [-10.0, 10.0], [-5.0, 10.0], [-1.0, 10.0]])
_LEVY_MARGIN = 0.1  # optimiser kept this fraction of the width away from each edge

_H6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_ARGMAX = np.array(
    [0.20168952, 0.15001069, 0.47687398, 0.27533243, 0.31165162, 0.65730054]
)


def levy(x) -> float:
    """Standard Levy function (minimisation form, minimum 0 at all-ones)."""
    x = np.asarray(x, dtype=float)
    w = 1.0 + (x - 1.0) / 4.0
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[-1]) ** 2)
    return float(head + mid + tail)


def hartmann6(x) -> float:
    """Standard Hartmann-6 on [0, 1]^6 (minimisation form, minimum about -3.32237)."""
    x = np.asarray(x, dtype=float)
    inner = np.sum(_H6_A * (x[None, :] - _H6_P) ** 2, axis=1)
    return float(-np.sum(_H6_ALPHA * np.exp(-inner)))


class Base(str, Enum):
    LEVY4 = "levy4"
    HARTMANN6 = "hartmann6"

    @property
    def effective_dim(self) -> int:
        return 4 if self is Base.LEVY4 else 6


@dataclass(frozen=True, eq=False)
class EmbeddedBenchmark:
    base: Base
    dim: int
    active_dims: tuple[int, ...]
    offsets: tuple[float, ...]
    bounds: np.ndarray  # (dim, 2) native box; inert dims use [0, 1]
    noise_std: float
    known_optimum: float
    seed: int | None

    @property
    def effective_dim(self) -> int:
        return self.base.effective_dim

    def to_native(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + u * (hi - lo)

    def to_unit(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (x - lo) / (hi - lo)

    def optimizer_unit(self) -> np.ndarray:
        """A unit-cube point attaining the known optimum (inert dims at 0.5)."""
        u = np.full(self.dim, 0.5)
        active = np.array(self.active_dims)
        if self.base is Base.LEVY4:
            native = 1.0 + np.array(self.offsets)
            lo, hi = self.bounds[active, 0], self.bounds[active, 1]
            u[active] = (native - lo) / (hi - lo)
        else:
            u[active] = HARTMANN6_ARGMAX
        return u

    def metadata(self) -> dict:
        return {
            "base": self.base.value,
            "D": self.dim,
            "active_dims": list(self.active_dims),
            "offsets": list(self.offsets),
            "noise_std": self.noise_std,
            "known_optimum": self.known_optimum,
            "seed": self.seed,
        }

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), sort_keys=True)


def make_embedded(base, dim: int, seed: int | None = None, noise_std: float = NOISE_STD):
    """Place a base function on random active coordinates of a ``dim``-D cube.

    Active coordinates are drawn without replacement; for Levy, each active
    coordinate also gets a random offset that moves the optimiser away from
    the all-ones diagonal while keeping it interior to the search box.
    """
    base = Base(base)
    d_e = base.effective_dim
    if dim < d_e:
        raise ContractViolation(f"ambient dimension {dim} is below the effective dimension {d_e}")
    rng = np.random.default_rng(seed)
    active = tuple(int(i) for i in rng.choice(dim, size=d_e, replace=False))
    bounds = np.tile([0.0, 1.0], (dim, 1))
    if base is Base.LEVY4:
        bounds[list(active)] = LEVY_BOUNDS
        width = LEVY_BOUNDS[:, 1] - LEVY_BOUNDS[:, 0]
        lo = LEVY_BOUNDS[:, 0] + _LEVY_MARGIN * width
        hi = LEVY_BOUNDS[:, 1] - _LEVY_MARGIN * width
        target = rng.uniform(lo, hi)
        offsets = tuple(float(v) for v in target - 1.0)
        optimum = 0.0
    else:
        offsets = ()
        optimum = -hartmann6(HARTMANN6_ARGMAX)
    bounds.setflags(write=False)
    return EmbeddedBenchmark(base, dim, active, offsets, bounds, noise_std, optimum, seed)


def evaluate_true(bench: EmbeddedBenchmark, u) -> float:
    """Noiseless objective (maximisation form) at unit-cube point ``u``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != bench.dim:
        raise ContractViolation(f"expected a {bench.dim}-D point, got {u.size}")
    if np.any(~np.isfinite(u)) or u.min() < 0.0 or u.max() > 1.0:
        raise ContractViolation("point lies outside the unit cube")
    active = np.array(bench.active_dims)
    x = bench.to_native(u)[active]
    if bench.base is Base.LEVY4:
        return -levy(x - np.array(bench.offsets))
    return -hartmann6(x)


def evaluate_noisy(bench: EmbeddedBenchmark, u, rng) -> float:
    """Noiseless value plus N(0, noise_std^2), drawing one normal from ``rng``."""
    value = evaluate_true(bench, u)
    eps = rng.standard_normal()
    return value + bench.noise_std * eps


def as_problem(bench: EmbeddedBenchmark):
    """Wrap a benchmark as a BO ``Problem`` carrying its metadata."""
    from .bo import Problem

    return Problem(
        objective=lambda u: evaluate_true(bench, u),
        dim=bench.dim,
        known_optimum=bench.known_optimum,
        noise_std=bench.noise_std,
        metadata=bench.metadata(),
    )
