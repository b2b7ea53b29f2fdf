"""Backward-difference numerical differentiation over uniform stencils.

The i-th backward difference of the newest sample x_0 is

    grad^i x_0 = sum_{j=0..i} (-1)^j C(i, j) x_{-j} / tau^i

but it is computed in the iterated form (difference neighbours, divide by
tau, repeat), which stays well conditioned for larger i. The closed form is
kept only as an oracle.
"""

import math
from functools import lru_cache

import numpy as np

from app.errors import ConfigurationError, DataError, StencilLengthError
from app.models import MAX_DEGREE, UniformWindow

FACTORIALS: tuple[int, ...] = tuple(math.factorial(k) for k in range(MAX_DEGREE + 2))


@lru_cache(maxsize=None)
def _pascal_row(i: int) -> tuple[int, ...]:
    if i == 0:
        return (1,)
    previous = _pascal_row(i - 1)
    return (1, *(previous[j - 1] + previous[j] for j in range(1, i)), 1)


def binomial(i: int, j: int) -> int:
    if i < 0 or j < 0 or j > i or i > MAX_DEGREE:
        raise ConfigurationError(f"binomial({i}, {j}) is outside 0 <= j <= i <= {MAX_DEGREE}")
    return _pascal_row(i)[j]


def _check_order(i: int) -> None:
    if not 1 <= i <= MAX_DEGREE:
        raise ConfigurationError(f"derivative order must be between 1 and {MAX_DEGREE}, got {i}")


def _window_tail(window: UniformWindow, i: int) -> np.ndarray:
    _check_order(i)
    if len(window.values) < i + 1:
        raise StencilLengthError(required=i + 1, available=len(window.values))
    tail = np.asarray(window.values[-(i + 1) :], dtype=float)
    if not np.all(np.isfinite(tail)):
        raise DataError("window contains non-finite values")
    return tail


def backward_difference(window: UniformWindow, i: int) -> float:
    differences = _window_tail(window, i)
    for _ in range(i):
        differences = np.diff(differences) / window.tau
    return float(differences[-1])


def backward_difference_closed_form(window: UniformWindow, i: int) -> float:
    tail = _window_tail(window, i)
    # tail[-1 - j] is x_{-j}
    total = math.fsum((-1) ** j * binomial(i, j) * tail[-1 - j] for j in range(i + 1))
    return total / window.tau**i


def backward_differences(states: np.ndarray, tau: float, degree: int) -> np.ndarray:
    """All backward differences grad^1..grad^degree of the newest row.

    ``states`` is an (k, n) array of samples, oldest first, with k >= degree + 1.
    Returns an (n, degree) array.
    """
    _check_order(degree)
    if states.shape[0] < degree + 1:
        raise StencilLengthError(required=degree + 1, available=states.shape[0])
    differences = states[-(degree + 1) :]
    derivs = np.empty((states.shape[1], degree))
    for i in range(degree):
        differences = np.diff(differences, axis=0) / tau
        derivs[:, i] = differences[-1]
    return derivs


@lru_cache(maxsize=None)
def _bd_coefficient_sum(i: int) -> int:
    return abs(sum((-1) ** j * binomial(i, j) * (-j) ** (i + 1) for j in range(i + 1)))


def bd_coefficient_magnitude(i: int) -> float:
    _check_order(i)
    return float(_bd_coefficient_sum(i))


def bd_error_bound(i: int, tau: float, deriv_bound_ip1: float) -> float:
    """Leading-order bound on |xi^(i)(t) - grad^i x_0|.

    ``deriv_bound_ip1`` bounds |xi^(i+1)| near t. The O(tau^2) remainder is not
    included, so the bound is only tight for small tau.
    """
    magnitude = bd_coefficient_magnitude(i)
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    if deriv_bound_ip1 < 0:
        raise ConfigurationError("derivative bound must be non-negative")
    return tau * deriv_bound_ip1 / FACTORIALS[i + 1] * magnitude
