import math
from collections import deque
from collections.abc import Iterator, Mapping
from typing import Any

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.errors import ConfigurationError, DataError, SamplingError
from app.models import MonitorConfig, MonitorStatus, MonitorVerdict, PredictionSet, TrajectoryLog
from app.numdiff import FACTORIALS, backward_differences
from app.taylor import horner

TIMESTAMP_TOLERANCE = 1e-6


class Monitor:
    """Streaming Taylor-based predictive monitor.

    Keeps the latest ``degree + 1`` samples in a FIFO window. Once the window is
    full, every observation fits the approximated Taylor polynomial, predicts
    the next ``horizon`` states and returns their safety levels. One instance
    serves one stream; it is not safe for concurrent ``observe`` calls.
    """

    def __init__(self, config: MonitorConfig) -> None:
        self.config = config
        self._window: deque[np.ndarray] = deque(maxlen=config.degree + 1)
        self._offsets = config.tau * np.arange(1, config.horizon + 1)
        self._inverse_factorials = 1.0 / np.asarray(FACTORIALS[1 : config.degree + 1], dtype=float)

        self._dim: int | None = None
        self._last_time: float | None = None
        self._processed_count = 0
        self._verdict_count = 0
        self._reset_count = 0
        self._last_error: str | None = None
        self._last_prediction: PredictionSet | None = None

    @property
    def warming_up(self) -> bool:
        return len(self._window) < self._window.maxlen

    @property
    def window_size(self) -> int:
        return len(self._window)

    @property
    def last_prediction(self) -> PredictionSet | None:
        return self._last_prediction

    def reset(self) -> None:
        self._window.clear()
        self._last_time = None
        self._last_prediction = None

    def status(self) -> MonitorStatus:
        return MonitorStatus(
            tau=self.config.tau,
            degree=self.config.degree,
            horizon=self.config.horizon,
            spec_name=self.config.spec.name,
            buffered=len(self._window),
            processed_count=self._processed_count,
            verdict_count=self._verdict_count,
            reset_count=self._reset_count,
            last_time=self._last_time,
            last_error=self._last_error,
        )

    def _check_sample(self, state: np.ndarray) -> None:
        if state.ndim != 1 or state.shape[0] < 1:
            raise DataError(f"state must be a non-empty vector, got shape {state.shape}")
        if self._dim is not None and state.shape[0] != self._dim:
            raise DataError(f"state has dimension {state.shape[0]}, expected {self._dim}")
        if not np.all(np.isfinite(state)):
            raise DataError("state contains non-finite values")

    def _check_timestamp(self, t: float) -> None:
        if self._last_time is None:
            return
        tau = self.config.tau
        gap = t - self._last_time
        if abs(gap - tau) <= TIMESTAMP_TOLERANCE * tau:
            return
        message = f"sample at t={t} is {gap} s after the previous one, expected {tau} s"
        logger.warning("Resetting monitor window: {}", message)
        self._window.clear()
        self._reset_count += 1
        self._last_error = message
        raise SamplingError(message)

    def observe(self, x: Any, t: float) -> MonitorVerdict | None:
        state = np.array(x, dtype=float)
        self._check_sample(state)
        t = float(t)
        if not math.isfinite(t):
            raise DataError(f"timestamp must be finite, got {t}")
        try:
            self._check_timestamp(t)
        finally:
            # The offending sample seeds the next warm-up.
            self._window.append(state)
            self._last_time = t
            self._dim = state.shape[0]
            self._processed_count += 1

        if len(self._window) < self._window.maxlen:
            return None

        config = self.config
        stencil = np.stack(self._window)
        with np.errstate(over="ignore", invalid="ignore"):
            derivs = backward_differences(stencil, config.tau, config.degree)
            predicted = horner(derivs * self._inverse_factorials, state, self._offsets)
        if not np.all(np.isfinite(predicted)):
            self._last_prediction = None
            raise DataError(f"prediction at t={t} overflowed to non-finite states")
        self._last_prediction = PredictionSet(base_time=t, tau=config.tau, states=predicted)

        levels = config.spec.levels(predicted)
        if not np.all(np.isfinite(levels)):
            raise DataError(f"safety level at t={t} is non-finite")
        self._verdict_count += 1
        return MonitorVerdict.from_levels(t, levels)


def monitor_new(config: MonitorConfig | Mapping[str, Any]) -> Monitor:
    try:
        validated = MonitorConfig.model_validate(config)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid monitor configuration: {exc}") from exc
    return Monitor(validated)


def replay(monitor: Monitor, log: TrajectoryLog) -> Iterator[tuple[int, MonitorVerdict | None]]:
    """Feed every sample of ``log`` to ``monitor``, yielding (sample index, verdict)."""
    for index in range(len(log)):
        yield index, monitor.observe(log.states[index], log.times[index])
