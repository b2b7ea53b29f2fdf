"""Ground-truth trajectories: closed-form oracles and RK4-integrated closed loops."""

from collections.abc import Mapping

import numpy as np
from loguru import logger

from app.errors import ConfigurationError, SimulationDivergenceError
from app.models import SystemModel, TrajectoryLog

DIVERGENCE_LIMIT = 1e12

ANALYTIC_DEFAULTS: dict[str, dict[str, float]] = {
    "constant": {"value": 1.0},
    "affine": {"a": 0.0, "b": 1.0},
    "quadratic": {"a": 0.0, "b": 0.0, "c": 1.0},
    "sine": {"amplitude": 1.0, "omega": 1.0, "phase": 0.0},
    "oscillator": {"amplitude": 1.0, "omega": 1.0},
}


def _derivative(model: SystemModel, x: np.ndarray) -> np.ndarray:
    # Feedback is re-evaluated at every stage: u(t) = pi(x(t)).
    return np.asarray(model.dynamics(x, model.controller(x)), dtype=float)


def rk4_step(model: SystemModel, x: np.ndarray, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ConfigurationError(f"integrator step must be positive, got {dt}")
    k1 = _derivative(model, x)
    k2 = _derivative(model, x + 0.5 * dt * k1)
    k3 = _derivative(model, x + 0.5 * dt * k2)
    k4 = _derivative(model, x + dt * k3)
    if not np.all(np.isfinite([k1, k2, k3, k4])):
        raise SimulationDivergenceError(f"{model.name}: dynamics returned a non-finite derivative", step=0)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate(model: SystemModel, tau: float, steps: int, substeps: int = 1) -> TrajectoryLog:
    if tau <= 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if steps < 1 or substeps < 1:
        raise ConfigurationError("steps and substeps must be at least 1")

    dt = tau / substeps
    states = np.empty((steps + 1, model.dim_x))
    states[0] = model.initial_state
    x = model.initial_state.copy()
    for step in range(1, steps + 1):
        try:
            for _ in range(substeps):
                x = rk4_step(model, x, dt)
        except SimulationDivergenceError as exc:
            logger.error("Simulation of {} diverged at step {}", model.name, step)
            raise SimulationDivergenceError(f"{model.name}: dynamics returned a non-finite derivative", step) from exc
        if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            logger.error("Simulation of {} diverged at step {}", model.name, step)
            raise SimulationDivergenceError(f"{model.name}: state exceeded {DIVERGENCE_LIMIT:g}", step)
        states[step] = x

    logger.debug("Simulated {} for {} steps (tau={}, substeps={})", model.name, steps, tau, substeps)
    return TrajectoryLog(
        tau=tau,
        times=np.arange(steps + 1) * tau,
        states=states,
        provenance="integrated",
        substeps=substeps,
    )


def _resolve_params(kind: str, params: Mapping[str, float] | None) -> dict[str, float]:
    if kind not in ANALYTIC_DEFAULTS:
        raise ConfigurationError(f"unknown trajectory kind {kind!r}")
    resolved = dict(ANALYTIC_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in resolved:
            raise ConfigurationError(f"{kind} trajectory has no parameter {key!r}")
        if not np.isfinite(value):
            raise ConfigurationError(f"parameter {key!r} must be finite")
        resolved[key] = float(value)
    return resolved


def analytic_states(kind: str, params: Mapping[str, float] | None, s: np.ndarray) -> np.ndarray:
    """Closed-form trajectory of ``kind`` evaluated at times ``s``; shape (len(s), n)."""
    p = _resolve_params(kind, params)
    if kind == "constant":
        values = np.full_like(s, p["value"])
    elif kind == "affine":
        values = p["a"] + p["b"] * s
    elif kind == "quadratic":
        values = p["a"] + p["b"] * s + p["c"] * s**2
    elif kind == "sine":
        values = p["amplitude"] * np.sin(p["omega"] * s + p["phase"])
    else:
        amplitude, omega = p["amplitude"], p["omega"]
        return np.column_stack([amplitude * np.cos(omega * s), -amplitude * omega * np.sin(omega * s)])
    return values.reshape(-1, 1)


def analytic_log(kind: str, params: Mapping[str, float] | None, tau: float, steps: int) -> TrajectoryLog:
    if tau <= 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if steps < 1:
        raise ConfigurationError("steps must be at least 1")
    times = np.arange(steps + 1) * tau
    return TrajectoryLog(
        tau=tau,
        times=times,
        states=analytic_states(kind, params, times),
        provenance="analytic",
    )
