"""Expected improvement as a function of correlation with the incumbent.

With the GP standardised to prior mean ``c`` and signal std ``sigma_f``, a
candidate whose correlation with the incumbent is ``rho`` (and which is
otherwise uninformed) has mean ``c + rho * (y_max - c)`` and std
``sigma_f * sqrt(1 - rho^2)``. Writing ``yhat = (y_max - c) / sigma_f``,
EI becomes a function of ``rho`` and ``yhat`` alone, and its maximiser is
bounded below by the root of ``rho * sqrt((1 + rho) / (1 - rho)) = yhat``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.special import ndtr

from .acquisition import _npdf, log_ei_at, log_h
from .exceptions import ContractViolation

RHO_GRID_SIZE = 4096
RHO_GRID_MAX = 1.0 - 1e-6
BISECTION_TOL = 1e-10
PROP1_YHATS = np.round(np.arange(1, 31) * 0.1, 10)
PROP1_CSV_COLUMNS = ("yhat", "rho_bound", "rho_star_numeric")


def _check(rho, yhat):
    rho = np.asarray(rho, dtype=float)
    if not yhat > 0:
        raise ContractViolation(f"yhat must be > 0, got {yhat}")
    if np.any(~np.isfinite(rho)) or np.any(rho < 0.0) or np.any(rho >= 1.0):
        raise ContractViolation("rho must lie in [0, 1)")
    return rho


def _z(rho, yhat):
    # (rho - 1) / sqrt(1 - rho^2) == -sqrt((1 - rho) / (1 + rho)), no cancellation
    return -yhat * np.sqrt((1.0 - rho) / (1.0 + rho))


def log_ei_of_rho(rho, yhat: float):
    """log EI(rho); finite all the way up to rho -> 1."""
    rho = _check(rho, yhat)
    sigma = np.sqrt((1.0 - rho) * (1.0 + rho))
    out = np.log(sigma) + log_h(np.atleast_1d(_z(rho, yhat))).reshape(rho.shape)
    return out if out.ndim else float(out)


def ei_of_rho(rho, yhat: float):
    """EI of a candidate with correlation ``rho`` to the incumbent, in units of sigma_f."""
    out = np.exp(log_ei_of_rho(rho, yhat))
    return out if np.ndim(out) else float(out)


def dei_drho(rho, yhat: float):
    """d EI / d rho = yhat Phi(Z) - rho / sqrt(1 - rho^2) phi(Z)."""
    rho = _check(rho, yhat)
    z = _z(rho, yhat)
    out = yhat * ndtr(z) - rho / np.sqrt((1.0 - rho) * (1.0 + rho)) * _npdf(z)
    return out if out.ndim else float(out)


def _bound_gap(rho, yhat):
    return rho * math.sqrt((1.0 + rho) / (1.0 - rho)) - yhat


def rho_lower_bound(yhat: float) -> float:
    """Root of rho * sqrt((1 + rho) / (1 - rho)) = yhat, by bisection."""
    if not yhat > 0:
        raise ContractViolation(f"yhat must be > 0, got {yhat}")
    hi = math.nextafter(1.0, 0.0)
    if _bound_gap(hi, yhat) <= 0:
        return hi
    return float(bisect(_bound_gap, 0.0, hi, args=(yhat,), xtol=BISECTION_TOL))


def rho_star_numeric(yhat: float, grid_size: int = RHO_GRID_SIZE) -> float:
    """Maximiser of EI(rho) on [0, 1 - 1e-6]: dense grid, then golden section."""
    grid = np.linspace(0.0, RHO_GRID_MAX, grid_size)
    vals = log_ei_of_rho(grid, yhat)
    i = int(np.argmax(vals))
    if i == 0 or i == grid_size - 1:
        return float(grid[i])

    def neg(r):
        return -log_ei_of_rho(min(max(r, 0.0), RHO_GRID_MAX), yhat)

    res = minimize_scalar(
        neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-12
    )
    r = float(res.x)
    return r if -res.fun >= vals[i] else float(grid[i])


@dataclass(frozen=True)
class RhoProfile:
    yhat: float
    rho: np.ndarray
    ei: np.ndarray
    dei: np.ndarray
    rho_star: float
    rho_bound: float


def rho_profile(yhat: float, grid_size: int = RHO_GRID_SIZE) -> RhoProfile:
    rho = np.linspace(0.0, RHO_GRID_MAX, grid_size)
    return RhoProfile(
        yhat,
        rho,
        ei_of_rho(rho, yhat),
        dei_drho(rho, yhat),
        rho_star_numeric(yhat, grid_size),
        rho_lower_bound(yhat),
    )


def prop1_table(yhats=PROP1_YHATS):
    """(yhat, rho_bound, rho_star_numeric) rows."""
    return [(float(y), rho_lower_bound(y), rho_star_numeric(y)) for y in yhats]


def write_prop1_csv(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PROP1_CSV_COLUMNS)
    for row in rows:
        w.writerow([format(float(v), ".17g") for v in row])


@dataclass(frozen=True)
class LocalityReport:
    """Per-query distances; index i describes query ``iterations[i]``."""

    iterations: np.ndarray
    dist_to_incumbent: np.ndarray
    min_dist_to_data: np.ndarray
    post_doe: np.ndarray  # bool mask

    def median_post_doe_distance(self) -> float:
        d = self.dist_to_incumbent[self.post_doe]
        return float(np.median(d)) if d.size else math.nan


def locality_report(history) -> LocalityReport:
    """Distance of every query (after the first) to the running incumbent and
    to its nearest previously observed point."""
    if not len(history):
        raise ContractViolation("locality report of an empty history")
    recs = history.records[1:]
    return LocalityReport(
        np.array([r.iteration for r in recs], dtype=int),
        np.array([r.dist_to_incumbent for r in recs]),
        np.array([r.min_dist_to_data for r in recs]),
        np.array([r.phase == "bo" for r in recs], dtype=bool),
    )


@dataclass(frozen=True)
class RidgeExtent:
    axis_coverage: float  # fraction of the x_1 grid with a near-maximal candidate
    cross_spread: float  # x_2 range of all near-maximal candidates
    argmax: np.ndarray


def ridge_extent(model, y_max: float, factor: float = 1e-5, grid=(401, 2001)) -> RidgeExtent:
    """Extent of the set {x : EI(x) >= factor * max EI} for a 2D model."""
    if model.kernel.dim != 2:
        raise ContractViolation("ridge extent is defined for 2D models")
    g1 = np.linspace(0.0, 1.0, grid[0])
    g2 = np.linspace(0.0, 1.0, grid[1])
    X = np.stack(np.meshgrid(g1, g2), axis=-1).reshape(-1, 2)
    vals = log_ei_at(model, X, y_max).reshape(grid[1], grid[0])
    top = vals.max()
    near = vals >= top + math.log(factor)
    i2, i1 = np.unravel_index(int(np.argmax(vals)), vals.shape)
    rows = g2[near.any(axis=1)]
    return RidgeExtent(
        float(near.any(axis=0).mean()), float(rows.max() - rows.min()), np.array([g1[i1], g2[i2]])
    )
