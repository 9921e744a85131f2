"""Exception types shared across the package."""

from __future__ import annotations


class ContractViolation(ValueError):
    """An argument broke a documented precondition (shape, range, sign)."""


class NumericalError(ArithmeticError):
    """A factorization or solve failed even after jitter escalation."""

    def __init__(self, message: str, condition: float | None = None, jitter: float | None = None):
        super().__init__(message)
        self.condition = condition
        self.jitter = jitter


class FitError(RuntimeError):
    """Every restart of a hyperparameter fit failed.

    ``best`` holds the best partial result seen before giving up, if any.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class AcquisitionError(RuntimeError):
    """The acquisition surface is degenerate (zero variance everywhere)."""


class RunError(RuntimeError):
    """A BO run aborted; ``history`` carries everything evaluated so far."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
