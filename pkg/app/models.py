from collections.abc import Callable
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MAX_DEGREE = 32

ArrayConfig = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _as_float_array(value: object, ndim: int) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {array.shape}")
    array.setflags(write=False)
    return array


class UniformWindow(BaseModel):
    """One state dimension sampled every ``tau`` seconds, oldest first.

    The last element is x_0 (the sample at the current time t); the element
    ``j`` places from the end is x_{-j}.
    """

    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...] = Field(min_length=1)
    tau: float = Field(gt=0)


class Stencil(BaseModel):
    model_config = ArrayConfig

    times: np.ndarray
    states: np.ndarray
    tau: float = Field(gt=0)

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value: object) -> np.ndarray:
        return _as_float_array(value, 1)

    @field_validator("states", mode="before")
    @classmethod
    def _coerce_states(cls, value: object) -> np.ndarray:
        array = np.array(value, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        return _as_float_array(array, 2)

    @model_validator(mode="after")
    def _check_shapes(self) -> "Stencil":
        if len(self.times) == 0:
            raise ValueError("stencil is empty")
        if self.states.shape[0] != len(self.times):
            raise ValueError("every sample needs exactly one timestamp")
        if self.states.shape[1] < 1:
            raise ValueError("state dimension must be at least 1")
        return self

    @property
    def length(self) -> int:
        return len(self.times)


class TaylorModel(BaseModel):
    """Approximated Taylor polynomial anchored at the newest stencil sample.

    ``derivs[d, i - 1]`` holds the i-th backward difference of dimension d.
    """

    model_config = ArrayConfig

    base_time: float
    base_state: np.ndarray
    derivs: np.ndarray
    degree: int = Field(ge=1, le=MAX_DEGREE)

    @model_validator(mode="after")
    def _check_model(self) -> "TaylorModel":
        if self.derivs.shape != (self.base_state.shape[0], self.degree):
            raise ValueError(f"derivs must have shape (n, degree), got {self.derivs.shape}")
        if not (np.all(np.isfinite(self.base_state)) and np.all(np.isfinite(self.derivs))):
            raise ValueError("taylor model entries must be finite")
        return self


class PredictionSet(BaseModel):
    model_config = ArrayConfig

    base_time: float
    tau: float = Field(gt=0)
    states: np.ndarray

    @model_validator(mode="after")
    def _check_states(self) -> "PredictionSet":
        if self.states.ndim != 2 or self.states.shape[0] < 1:
            raise ValueError("prediction set needs at least one predicted state")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("predicted states must be finite")
        return self

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.base_time + self.tau * np.arange(1, self.horizon + 1)


class SafetySpec(BaseModel):
    """Quantitative safety property: phi(x) >= 0 is safe, phi(x) < 0 is a violation."""

    model_config = ConfigDict(frozen=True)

    name: str
    evaluator: Callable[[np.ndarray], float]

    def __call__(self, state: np.ndarray) -> float:
        return float(self.evaluator(state))

    def levels(self, states: np.ndarray) -> np.ndarray:
        return np.fromiter((self.evaluator(row) for row in states), dtype=float, count=len(states))

    @classmethod
    def from_predicate(cls, name: str, is_unsafe: Callable[[np.ndarray], bool]) -> "SafetySpec":
        return cls(name=name, evaluator=lambda x: -1.0 if is_unsafe(x) else 0.0)

    @classmethod
    def constant(cls, level: float = 0.0, name: str = "unconstrained") -> "SafetySpec":
        return cls(name=name, evaluator=lambda _x: level)


class MonitorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(gt=0)
    degree: int = Field(ge=1, le=MAX_DEGREE)
    horizon: int = Field(ge=1)
    spec: SafetySpec


class MonitorVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    at_time: float
    predicted_levels: tuple[float, ...]
    min_level: float
    first_violation: int | None = None
    warning: bool = False

    @classmethod
    def from_levels(cls, at_time: float, levels: np.ndarray) -> "MonitorVerdict":
        negative = np.flatnonzero(levels < 0)
        first_violation = int(negative[0]) + 1 if negative.size else None
        return cls(
            at_time=at_time,
            predicted_levels=tuple(levels.tolist()),
            min_level=float(levels.min()),
            first_violation=first_violation,
            warning=first_violation is not None,
        )

    def first_violation_seconds(self, tau: float) -> float | None:
        if self.first_violation is None:
            return None
        return self.first_violation * tau


class MonitorStatus(BaseModel):
    tau: float
    degree: int
    horizon: int
    spec_name: str
    buffered: int
    processed_count: int
    verdict_count: int
    reset_count: int
    last_time: float | None
    last_error: str | None


class TtcVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: MonitorVerdict
    ttc_steps: int | None = None

    @classmethod
    def from_verdict(cls, verdict: MonitorVerdict) -> "TtcVerdict":
        return cls(verdict=verdict, ttc_steps=verdict.first_violation)

    def ttc_seconds(self, tau: float) -> float | None:
        return self.verdict.first_violation_seconds(tau)


class SystemModel(BaseModel):
    model_config = ArrayConfig

    name: str
    dim_x: int = Field(ge=1)
    dim_u: int = Field(ge=0)
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray]
    controller: Callable[[np.ndarray], np.ndarray]
    initial_state: np.ndarray

    @field_validator("initial_state", mode="before")
    @classmethod
    def _coerce_initial_state(cls, value: object) -> np.ndarray:
        return _as_float_array(value, 1)

    @model_validator(mode="after")
    def _check_dimension(self) -> "SystemModel":
        if self.initial_state.shape[0] != self.dim_x:
            raise ValueError(f"initial state must have {self.dim_x} components")
        return self


class TrajectoryLog(BaseModel):
    model_config = ArrayConfig

    tau: float = Field(gt=0)
    times: np.ndarray
    states: np.ndarray
    provenance: Literal["analytic", "integrated", "external"] = "external"
    substeps: int | None = None

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value: object) -> np.ndarray:
        return _as_float_array(value, 1)

    @field_validator("states", mode="before")
    @classmethod
    def _coerce_states(cls, value: object) -> np.ndarray:
        array = np.array(value, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        return _as_float_array(array, 2)

    @model_validator(mode="after")
    def _check_log(self) -> "TrajectoryLog":
        if self.states.shape[0] != len(self.times):
            raise ValueError("every sample needs exactly one timestamp")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory states must be finite")
        return self

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def stencil(self, end_index: int, length: int) -> Stencil:
        start = end_index - length + 1
        if start < 0:
            start = 0
        return Stencil(
            times=self.times[start : end_index + 1],
            states=self.states[start : end_index + 1],
            tau=self.tau,
        )


class ConfusionCounts(BaseModel):
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    warmup_steps: int = Field(default=0, ge=0)
    total_steps: int = Field(default=0, ge=0)

    @property
    def evaluated_steps(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


class AblationRecord(BaseModel):
    lookahead_steps: int = Field(ge=1)
    lookahead_seconds: float
    rmse: float = Field(ge=0)
    mean_error: float
    std_error: float
    samples: int = Field(ge=1)


class ExperimentConfig(BaseModel):
    system: str | None = None
    input: Path | None = None
    tau: float | None = Field(default=None, gt=0)
    degrees: list[int] = Field(min_length=1)
    horizons: list[int] = Field(min_length=1)
    steps: int = Field(ge=1)
    seed: int = 0
    substeps: int = Field(default=1, ge=1)
    baseline: bool = False
    save_predictions: bool = False
    out_dir: Path

    @field_validator("degrees")
    @classmethod
    def _check_degrees(cls, value: list[int]) -> list[int]:
        for degree in value:
            if not 1 <= degree <= MAX_DEGREE:
                raise ValueError(f"degree must be between 1 and {MAX_DEGREE}, got {degree}")
        return value

    @field_validator("horizons")
    @classmethod
    def _check_horizons(cls, value: list[int]) -> list[int]:
        for horizon in value:
            if horizon < 1:
                raise ValueError(f"horizon must be at least 1, got {horizon}")
        return value
