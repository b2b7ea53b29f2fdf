"""Desk-scale closed-loop systems with their safety properties.

car_track
    Kinematic unicycle (x, y, heading, speed) on a circular track of radius
    10 m and width 2 m, driven by a pure-pursuit controller. The pursued
    point weaves around the centerline by a seeded lateral offset that depends
    on the car's polar angle, so some laps graze the boundaries.

altitude_hold
    Vertical point mass (altitude, climb rate, clock) under PD control toward
    a setpoint that switches every 30 s between seeded values near the bottom
    and the top of the 1000-45000 ft corridor. The clock component exists only
    so the controller can read the schedule from the state.
"""

import math

import numpy as np

from app.errors import ConfigurationError
from app.models import SafetySpec, SystemModel
from app.sim import ANALYTIC_DEFAULTS

TRACK_RADIUS = 10.0
TRACK_HALF_WIDTH = 1.0
CLEARANCE_THRESHOLD = 0.5
CAR_SPEED_REF = 2.0
CAR_SPEED_GAIN = 1.0
PURSUIT_LOOKAHEAD = 2.0
WEAVE_HARMONICS = (2, 3, 4)

ALT_MIN = 1000.0
ALT_MAX = 45000.0
ALT_START = 23000.0
SETPOINT_PERIOD = 30.0
SETPOINT_RAMP = 8.0
SETPOINT_KNOTS = 256
ALT_NATURAL_FREQUENCY = 0.25
ALT_DAMPING = 0.6

DEFAULT_TAU: dict[str, float] = {
    "car_track": 0.01,
    "altitude_hold": 0.033,
}
ANALYTIC_TAU = 0.01
BUILTIN_SYSTEMS = tuple(DEFAULT_TAU)


def track_clearance(state: np.ndarray) -> float:
    radial_error = abs(math.hypot(state[0], state[1]) - TRACK_RADIUS)
    return (TRACK_HALF_WIDTH - radial_error) - CLEARANCE_THRESHOLD


def altitude_margin(state: np.ndarray) -> float:
    altitude = state[0]
    return min(altitude - ALT_MIN, ALT_MAX - altitude)


def unit_ceiling(state: np.ndarray) -> float:
    return 1.0 - state[0]


def _car_track(seed: int) -> SystemModel:
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(0.1, 0.3, size=len(WEAVE_HARMONICS)).tolist()
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(WEAVE_HARMONICS)).tolist()
    weave = list(zip(WEAVE_HARMONICS, amplitudes, phases))

    def lateral_offset(angle: float) -> float:
        return sum(a * math.sin(k * angle + p) for k, a, p in weave)

    def controller(x: np.ndarray) -> np.ndarray:
        px, py, heading, speed = x
        target_angle = math.atan2(py, px) + PURSUIT_LOOKAHEAD / TRACK_RADIUS
        target_radius = TRACK_RADIUS + lateral_offset(target_angle)
        tx = target_radius * math.cos(target_angle)
        ty = target_radius * math.sin(target_angle)
        bearing = math.atan2(ty - py, tx - px) - heading
        alpha = math.atan2(math.sin(bearing), math.cos(bearing))
        turn_rate = 2.0 * speed * math.sin(alpha) / PURSUIT_LOOKAHEAD
        return np.array([turn_rate, CAR_SPEED_GAIN * (CAR_SPEED_REF - speed)])

    def dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        heading, speed = x[2], x[3]
        return np.array([speed * math.cos(heading), speed * math.sin(heading), u[0], u[1]])

    return SystemModel(
        name="car_track",
        dim_x=4,
        dim_u=2,
        dynamics=dynamics,
        controller=controller,
        initial_state=[TRACK_RADIUS, 0.0, math.pi / 2, CAR_SPEED_REF],
    )


def _setpoint_schedule(seed: int) -> list[float]:
    rng = np.random.default_rng(seed)
    start_high = bool(rng.integers(2))
    knots = [ALT_START]
    for k in range(1, SETPOINT_KNOTS):
        high = (k % 2 == 1) == start_high
        knots.append(float(rng.uniform(41000.0, 43500.0) if high else rng.uniform(1800.0, 4000.0)))
    return knots


def _altitude_hold(seed: int) -> SystemModel:
    knots = _setpoint_schedule(seed)
    kp = ALT_NATURAL_FREQUENCY**2
    kd = 2.0 * ALT_DAMPING * ALT_NATURAL_FREQUENCY

    def setpoint(clock: float) -> float:
        segment = min(max(int(clock // SETPOINT_PERIOD), 0), len(knots) - 1)
        if segment == 0:
            return knots[0]
        u = min(max((clock - segment * SETPOINT_PERIOD) / SETPOINT_RAMP, 0.0), 1.0)
        blend = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
        return knots[segment - 1] + (knots[segment] - knots[segment - 1]) * blend

    def controller(x: np.ndarray) -> np.ndarray:
        altitude, climb, clock = x
        return np.array([kp * (setpoint(clock) - altitude) - kd * climb])

    def dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([x[1], u[0], 1.0])

    return SystemModel(
        name="altitude_hold",
        dim_x=3,
        dim_u=1,
        dynamics=dynamics,
        controller=controller,
        initial_state=[ALT_START, 0.0, 0.0],
    )


def builtin_spec(name: str) -> SafetySpec:
    if name == "car_track":
        return SafetySpec(name="track_clearance", evaluator=track_clearance)
    if name == "altitude_hold":
        return SafetySpec(name="altitude_corridor", evaluator=altitude_margin)
    if name in ANALYTIC_DEFAULTS:
        return SafetySpec(name="unit_ceiling", evaluator=unit_ceiling)
    raise ConfigurationError(f"unknown system {name!r}")


def builtin_system(name: str, seed: int = 0) -> tuple[SystemModel, SafetySpec]:
    if name == "car_track":
        return _car_track(seed), builtin_spec(name)
    if name == "altitude_hold":
        return _altitude_hold(seed), builtin_spec(name)
    raise ConfigurationError(f"unknown system {name!r}")


def default_tau(name: str) -> float:
    if name in DEFAULT_TAU:
        return DEFAULT_TAU[name]
    if name in ANALYTIC_DEFAULTS:
        return ANALYTIC_TAU
    raise ConfigurationError(f"unknown system {name!r}")
