"""Approximated Taylor polynomials built from backward differences.

Each state dimension gets its own polynomial

    P(s) = x_0 + sum_{i=1..l} grad^i x_0 / i! * (s - t)^i

anchored at the newest stencil sample t. Predictions are a single static
extrapolation of that polynomial; predicted states are never fed back.
"""

from collections.abc import Sequence

import numpy as np

from app.errors import ConfigurationError, DataError, StencilLengthError
from app.models import PredictionSet, Stencil, TaylorModel
from app.numdiff import FACTORIALS, backward_differences, bd_error_bound

SPACING_TOLERANCE = 1e-9


def _check_uniform(times: np.ndarray, tau: float) -> None:
    if len(times) < 2:
        return
    drift = np.abs(np.diff(times) - tau)
    if np.any(drift > SPACING_TOLERANCE * tau):
        raise DataError(f"stencil samples are not spaced {tau} s apart")


def fit_states(states: np.ndarray, base_time: float, tau: float, degree: int) -> TaylorModel:
    if not np.all(np.isfinite(states)):
        raise DataError("stencil contains non-finite states")
    return TaylorModel(
        base_time=base_time,
        base_state=states[-1].copy(),
        derivs=backward_differences(states, tau, degree),
        degree=degree,
    )


def fit(stencil: Stencil, degree: int) -> TaylorModel:
    if degree < 1:
        raise ConfigurationError(f"degree must be at least 1, got {degree}")
    if stencil.length < degree + 1:
        raise StencilLengthError(required=degree + 1, available=stencil.length)
    times = stencil.times[-(degree + 1) :]
    _check_uniform(times, stencil.tau)
    return fit_states(stencil.states[-(degree + 1) :], float(times[-1]), stencil.tau, degree)


def _coefficients(model: TaylorModel) -> np.ndarray:
    return model.derivs / np.asarray(FACTORIALS[1 : model.degree + 1], dtype=float)


def horner(coefficients: np.ndarray, base_state: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Evaluate the per-dimension polynomials at ``offsets`` seconds past the anchor.

    ``coefficients`` is (n, l) with column i-1 holding the (s - t)^i coefficient.
    Returns a (len(offsets), n) array.
    """
    dt = offsets[:, np.newaxis]
    result = np.zeros((len(offsets), base_state.shape[0])) + coefficients[:, -1]
    for i in range(coefficients.shape[1] - 2, -1, -1):
        result = result * dt + coefficients[:, i]
    return result * dt + base_state


def evaluate_many(model: TaylorModel, times: Sequence[float] | np.ndarray) -> np.ndarray:
    offsets = np.asarray(times, dtype=float) - model.base_time
    return horner(_coefficients(model), model.base_state, offsets)


def evaluate(model: TaylorModel, s: float) -> np.ndarray:
    return evaluate_many(model, [s])[0]


def predict_horizon(stencil: Stencil, degree: int, h: int) -> PredictionSet:
    if h < 1:
        raise ConfigurationError(f"horizon must be at least 1, got {h}")
    model = fit(stencil, degree)
    offsets = stencil.tau * np.arange(1, h + 1)
    states = horner(_coefficients(model), model.base_state, offsets)
    return PredictionSet(base_time=model.base_time, tau=stencil.tau, states=states)


def prediction_error_bound(degree: int, m: int, tau: float, deriv_bounds: Sequence[float]) -> float:
    """Leading-order bound on |xi(t + m tau) - x_hat_m|.

    ``deriv_bounds`` holds B_1..B_{degree+1}, bounds on |xi^(p)| near t. The
    first term is the Lagrange remainder of the exact Taylor polynomial, the
    second collects the backward-difference errors of every coefficient.
    """
    if len(deriv_bounds) != degree + 1:
        raise ConfigurationError(f"expected {degree + 1} derivative bounds, got {len(deriv_bounds)}")
    if any(bound < 0 for bound in deriv_bounds):
        raise ConfigurationError("derivative bounds must be non-negative")
    if m < 1 or tau <= 0:
        raise ConfigurationError("lookahead and tau must be positive")
    remainder = deriv_bounds[degree] / FACTORIALS[degree + 1] * (m * tau) ** (degree + 1)
    differencing = sum(bd_error_bound(p, tau, deriv_bounds[p]) for p in range(1, degree + 1))
    return remainder + differencing
