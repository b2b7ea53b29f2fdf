"""Boolean and quantitative accuracy metrics for predictive monitors.

A warning at step i is judged against the ground truth in the monitor's own
horizon, steps i+1..i+h. Steps whose horizon runs past the end of the log are
left out rather than padded.
"""

import math
from collections.abc import Sequence

import numpy as np

from app.errors import DataError
from app.models import AblationRecord, ConfusionCounts, PredictionSet, TrajectoryLog

GRID_TOLERANCE = 1e-6


def _unsafe_ahead(truth_levels: np.ndarray, horizon: int) -> np.ndarray:
    """For every step i with a full horizon, whether any of i+1..i+h is unsafe."""
    unsafe = np.concatenate([[0], np.cumsum(truth_levels < 0)])
    evaluated = len(truth_levels) - horizon
    if evaluated <= 0:
        return np.zeros(0, dtype=bool)
    steps = np.arange(evaluated)
    return (unsafe[steps + horizon + 1] - unsafe[steps + 1]) > 0


def label_confusion(
    truth_levels: Sequence[float],
    warnings: Sequence[bool | None],
    horizon: int,
) -> ConfusionCounts:
    """Label each step's warning as TP/FP/FN/TN.

    ``warnings[i]`` is ``None`` while the monitor is warming up; such steps
    count as "no warning".
    """
    if len(truth_levels) != len(warnings):
        raise DataError(f"{len(truth_levels)} truth levels but {len(warnings)} warnings")
    if horizon < 1:
        raise DataError("horizon must be at least 1")
    levels = np.asarray(truth_levels, dtype=float)
    ahead = _unsafe_ahead(levels, horizon)
    issued = np.array([bool(w) for w in warnings[: len(ahead)]], dtype=bool)
    warmup = sum(1 for w in warnings[: len(ahead)] if w is None)
    return ConfusionCounts(
        tp=int(np.sum(issued & ahead)),
        fp=int(np.sum(issued & ~ahead)),
        fn=int(np.sum(~issued & ahead)),
        tn=int(np.sum(~issued & ~ahead)),
        warmup_steps=warmup,
        total_steps=len(levels),
    )


def tpr(counts: ConfusionCounts) -> float | None:
    positives = counts.tp + counts.fn
    if positives == 0:
        return None
    return counts.tp / positives


def tnr(counts: ConfusionCounts) -> float | None:
    negatives = counts.tn + counts.fp
    if negatives == 0:
        return None
    return counts.tn / negatives


def earliest_warning_lead(
    warn_times: Sequence[float],
    unsafe_time: float,
    horizon: int,
    tau: float,
) -> float:
    """Steps between the earliest warning in [t_unsafe - h*tau, t_unsafe) and t_unsafe."""
    slack = GRID_TOLERANCE * tau
    window_start = unsafe_time - horizon * tau - slack
    in_window = [t for t in warn_times if window_start <= t < unsafe_time - slack]
    if not in_window:
        return 0.0
    return (unsafe_time - min(in_window)) / tau


def unsafe_entries(truth_levels: Sequence[float]) -> list[int]:
    levels = np.asarray(truth_levels, dtype=float)
    unsafe = levels < 0
    entering = unsafe & ~np.concatenate([[False], unsafe[:-1]])
    return np.flatnonzero(entering).tolist()


def mean_warning_lead(
    truth_levels: Sequence[float],
    warnings: Sequence[bool | None],
    times: Sequence[float],
    horizon: int,
    tau: float,
) -> float | None:
    if not len(truth_levels) == len(warnings) == len(times):
        raise DataError("truth levels, warnings and times must be aligned")
    entries = unsafe_entries(truth_levels)
    if not entries:
        return None
    warn_times = [times[i] for i, warned in enumerate(warnings) if warned]
    leads = [earliest_warning_lead(warn_times, times[i], horizon, tau) for i in entries]
    return math.fsum(leads) / len(leads)


def min_safety_distance_error(
    predicted_levels: Sequence[Sequence[float] | None],
    truth_levels: Sequence[float],
    horizon: int,
) -> float | None:
    """Mean |predicted - observed| minimum safety level over each step's horizon.

    The predicted minimum includes the current true level (lookahead 0).
    Steps without a prediction or without a full horizon are skipped.
    """
    if len(predicted_levels) != len(truth_levels):
        raise DataError(f"{len(predicted_levels)} predictions but {len(truth_levels)} truth levels")
    truth = np.asarray(truth_levels, dtype=float)
    errors = []
    for i in range(len(truth) - horizon):
        predicted = predicted_levels[i]
        if predicted is None:
            continue
        d_predicted = min(truth[i], min(predicted))
        d_observed = truth[i : i + horizon + 1].min()
        errors.append(abs(d_predicted - d_observed))
    if not errors:
        return None
    return math.fsum(errors) / len(errors)


def grid_index(truth: TrajectoryLog, t: float) -> int:
    index = int(round((t - truth.times[0]) / truth.tau))
    if index < 0 or index >= len(truth) or abs(truth.times[index] - t) > GRID_TOLERANCE * truth.tau:
        raise DataError(f"time {t} is not on the ground-truth sampling grid")
    return index


def rmse_by_lookahead(prediction_sets: Sequence[PredictionSet], truth: TrajectoryLog) -> list[AblationRecord]:
    """Prediction error statistics per lookahead m over every step with ground truth."""
    if not prediction_sets:
        return []
    errors: dict[int, list[float]] = {}
    for prediction in prediction_sets:
        base = grid_index(truth, prediction.base_time)
        available = min(prediction.horizon, len(truth) - 1 - base)
        if available < 1:
            continue
        deltas = prediction.states[:available] - truth.states[base + 1 : base + 1 + available]
        for m, error in enumerate(np.linalg.norm(deltas, axis=1).tolist(), start=1):
            errors.setdefault(m, []).append(error)

    records = []
    for m in sorted(errors):
        values = errors[m]
        count = len(values)
        mean = math.fsum(values) / count
        records.append(
            AblationRecord(
                lookahead_steps=m,
                lookahead_seconds=m * truth.tau,
                rmse=math.sqrt(math.fsum(e * e for e in values) / count),
                mean_error=mean,
                std_error=math.sqrt(math.fsum((e - mean) ** 2 for e in values) / count),
                samples=count,
            )
        )
    return records
