import math
import time

import numpy as np
import pytest

from app.errors import ConfigurationError, DataError, SamplingError
from app.models import MonitorConfig, SafetySpec, TrajectoryLog
from app.monitor import monitor_new, replay


def _ceiling(level: float = 1.0) -> SafetySpec:
    return SafetySpec(name="ceiling", evaluator=lambda x: level - x[0])


def _monitor(tau: float, degree: int, horizon: int, spec: SafetySpec | None = None):
    return monitor_new({"tau": tau, "degree": degree, "horizon": horizon, "spec": spec or _ceiling()})


def test_monitor_new_starts_in_warm_up() -> None:
    monitor = _monitor(0.01, 2, 50)
    assert monitor.warming_up is True
    assert monitor.window_size == 0
    assert monitor.last_prediction is None


def test_monitor_new_accepts_validated_config() -> None:
    config = MonitorConfig(tau=0.01, degree=2, horizon=50, spec=_ceiling())
    assert monitor_new(config).config == config


@pytest.mark.parametrize(
    "overrides",
    [{"degree": 0}, {"horizon": 0}, {"degree": 33}, {"tau": 0.0}, {"tau": -0.1}],
)
def test_monitor_new_rejects_invalid_config(overrides: dict) -> None:
    config = {"tau": 0.01, "degree": 2, "horizon": 50, "spec": _ceiling(), **overrides}
    with pytest.raises(ConfigurationError):
        monitor_new(config)


@pytest.mark.parametrize("degree", [1, 2, 3, 5, 8])
def test_warm_up_lasts_exactly_degree_samples(degree: int) -> None:
    monitor = _monitor(0.1, degree, 3)
    for k in range(degree):
        assert monitor.observe([0.0], k * 0.1) is None
        assert monitor.warming_up is True
    for k in range(degree, degree + 10):
        assert monitor.observe([0.0], k * 0.1) is not None
        assert monitor.window_size == degree + 1


def test_constant_stream_with_boolean_spec_never_warns() -> None:
    spec = SafetySpec.from_predicate("never_unsafe", lambda x: False)
    monitor = _monitor(0.05, 2, 10, spec)
    verdicts = [monitor.observe([2.0, -1.0], k * 0.05) for k in range(6)]

    for verdict in verdicts[2:]:
        assert verdict.predicted_levels == (0.0,) * 10
        assert verdict.min_level == 0.0
        assert verdict.warning is False
        assert verdict.first_violation is None


def test_affine_stream_levels() -> None:
    monitor = _monitor(0.1, 1, 5)
    times = np.arange(7) * 0.1
    verdicts = [monitor.observe([t], t) for t in times]

    assert verdicts[0] is None
    assert verdicts[1].predicted_levels == pytest.approx((0.8, 0.7, 0.6, 0.5, 0.4), abs=1e-9)
    assert verdicts[1].warning is False
    assert verdicts[5].predicted_levels == pytest.approx((0.4, 0.3, 0.2, 0.1, 0.0), abs=1e-9)
    assert verdicts[6].predicted_levels == pytest.approx((0.3, 0.2, 0.1, 0.0, -0.1), abs=1e-9)
    assert verdicts[6].warning is True
    assert verdicts[6].predicted_levels[4] < 0


def test_level_of_exactly_zero_is_safe() -> None:
    # tau = 1/8 keeps every value exactly representable.
    monitor = _monitor(0.125, 1, 5)
    verdicts = [monitor.observe([k * 0.125], k * 0.125) for k in range(5)]

    assert verdicts[2].predicted_levels == (0.625, 0.5, 0.375, 0.25, 0.125)
    assert verdicts[4].predicted_levels == (0.375, 0.25, 0.125, 0.0, -0.125)
    assert verdicts[4].first_violation == 5
    assert verdicts[4].first_violation_seconds(0.125) == 0.625
    assert verdicts[4].min_level == -0.125


def test_affine_stream_with_affine_spec_matches_ground_truth() -> None:
    def trajectory(s: float) -> np.ndarray:
        return np.array([0.3 + 0.7 * s, -1.0 + 0.2 * s])

    spec = SafetySpec(name="plane", evaluator=lambda x: 2.0 - x[0] - 0.5 * x[1])
    tau, horizon = 0.01, 20
    monitor = _monitor(tau, 2, horizon, spec)
    for k in range(40):
        t = k * tau
        verdict = monitor.observe(trajectory(t), t)
        if verdict is None:
            continue
        truth = [spec(trajectory(t + m * tau)) for m in range(1, horizon + 1)]
        assert np.max(np.abs(np.array(verdict.predicted_levels) - truth)) <= 1e-9


def test_non_uniform_timestamp_resets_window() -> None:
    monitor = _monitor(0.1, 1, 3)
    monitor.observe([0.0], 0.0)
    assert monitor.observe([0.1], 0.1) is not None

    with pytest.raises(SamplingError):
        monitor.observe([0.35], 0.35)

    status = monitor.status()
    assert status.reset_count == 1
    assert status.last_error is not None
    assert monitor.window_size == 1
    assert monitor.warming_up is True
    assert monitor.observe([0.45], 0.45) is not None


def test_duplicate_timestamp_is_a_sampling_error() -> None:
    monitor = _monitor(0.1, 2, 3)
    monitor.observe([0.0], 0.0)
    with pytest.raises(SamplingError):
        monitor.observe([0.0], 0.0)


def test_dimension_mismatch_is_a_data_error() -> None:
    monitor = _monitor(0.1, 2, 3)
    monitor.observe([0.0, 1.0], 0.0)
    with pytest.raises(DataError):
        monitor.observe([0.0], 0.1)
    assert monitor.window_size == 1
    assert monitor.observe([0.1, 1.0], 0.1) is None


def test_non_finite_sample_is_a_data_error() -> None:
    monitor = _monitor(0.1, 1, 3)
    with pytest.raises(DataError):
        monitor.observe([float("nan")], 0.0)
    assert monitor.window_size == 0


def test_non_finite_timestamp_is_a_data_error() -> None:
    monitor = _monitor(0.1, 1, 3)
    monitor.observe([0.0], 0.0)
    with pytest.raises(DataError):
        monitor.observe([0.05], float("nan"))

    assert monitor.observe([0.1], 0.1) is not None
    assert monitor.status().reset_count == 0


def test_overflowing_prediction_is_a_data_error() -> None:
    monitor = _monitor(0.01, 2, 3)
    monitor.observe([1e308], 0.0)
    monitor.observe([-1e308], 0.01)
    with pytest.raises(DataError):
        monitor.observe([1e308], 0.02)
    assert monitor.last_prediction is None


def test_non_finite_safety_level_is_a_data_error() -> None:
    spec = SafetySpec(name="broken", evaluator=lambda x: float("nan"))
    monitor = _monitor(0.1, 1, 3, spec)
    monitor.observe([0.0], 0.0)
    with pytest.raises(DataError):
        monitor.observe([0.1], 0.1)


def test_status_counts_samples_and_verdicts() -> None:
    monitor = _monitor(0.1, 3, 4)
    for k in range(10):
        monitor.observe([math.sin(k * 0.1)], k * 0.1)

    status = monitor.status()
    assert status.processed_count == 10
    assert status.verdict_count == 7
    assert status.buffered == 4
    assert status.reset_count == 0
    assert status.spec_name == "ceiling"
    assert status.last_time == pytest.approx(0.9)


def test_last_prediction_and_reset() -> None:
    monitor = _monitor(0.1, 1, 4)
    monitor.observe([0.0], 0.0)
    monitor.observe([0.2], 0.1)

    prediction = monitor.last_prediction
    assert prediction.horizon == 4
    assert prediction.base_time == 0.1
    assert prediction.states[:, 0] == pytest.approx(np.array([0.4, 0.6, 0.8, 1.0]))

    monitor.reset()
    assert monitor.window_size == 0
    assert monitor.last_prediction is None
    assert monitor.observe([5.0], 7.0) is None


def test_identical_streams_give_identical_verdicts() -> None:
    rng = np.random.default_rng(99)
    samples = rng.normal(size=(200, 3)).cumsum(axis=0)
    spec = SafetySpec(name="radius", evaluator=lambda x: 25.0 - float(np.dot(x, x)))

    def run() -> list:
        monitor = _monitor(0.02, 3, 15, spec)
        return [monitor.observe(x, k * 0.02) for k, x in enumerate(samples)]

    assert run() == run()


def test_longer_horizon_never_drops_a_warning() -> None:
    spec = _ceiling(0.5)
    short = _monitor(0.05, 2, 5, spec)
    long = _monitor(0.05, 2, 20, spec)
    for k in range(200):
        t = k * 0.05
        x = [math.sin(t)]
        a = short.observe(x, t)
        b = long.observe(x, t)
        if a is None:
            assert b is None
            continue
        assert b.predicted_levels[:5] == a.predicted_levels
        if a.warning:
            assert b.warning


def test_replay_feeds_every_sample() -> None:
    log = TrajectoryLog(tau=0.1, times=np.arange(12) * 0.1, states=np.arange(12) * 0.05)
    monitor = _monitor(0.1, 2, 3)
    results = list(replay(monitor, log))

    assert [index for index, _ in results] == list(range(12))
    assert [verdict is None for _, verdict in results] == [True, True] + [False] * 10


@pytest.mark.parametrize(
    ("degree", "horizon", "budget_ns"),
    [(14, 1, 1_000_000), (5, 10, 1_000_000), (2, 100, 2_000_000)],
)
def test_observe_latency_p99(degree: int, horizon: int, budget_ns: int) -> None:
    spec = SafetySpec(name="band", evaluator=lambda x: 2.0 - abs(x[0]))
    monitor = _monitor(0.01, degree, horizon, spec)
    samples = np.sin(np.arange(100_000) * 0.01)

    latencies = np.empty(len(samples))
    for k, value in enumerate(samples):
        state = np.array([value])
        start = time.perf_counter_ns()
        monitor.observe(state, k * 0.01)
        latencies[k] = time.perf_counter_ns() - start

    assert np.percentile(latencies, 99) < budget_ns
