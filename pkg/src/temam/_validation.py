"""Exception types and small argument checks shared across the package."""

import math


class TemamError(Exception):
    """Base class for package errors."""


class ConfigurationError(TemamError, ValueError):
    pass


class GridMismatchError(TemamError, ValueError):
    pass


class DomainError(TemamError, ValueError):
    """Argument outside the mathematical domain of an operator."""


class SolverDivergenceError(TemamError, RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class QuadratureError(TemamError, RuntimeError):
    pass


def check_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise DomainError(f"{name} must be a non-negative finite number, got {value!r}")
    return float(value)


def check_same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def check_q(q):
    q = float(q)
    if not q >= 1:
        raise ValueError(f"q must lie in [1, inf], got {q}")
    return q
