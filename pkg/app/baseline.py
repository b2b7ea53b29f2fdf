"""Time-to-collision baseline.

TTC assumes the system keeps its current velocity. Here that is the degree-1
Taylor monitor: the velocity is the first backward difference of the last
two samples, and the time to collision is the first predicted violation.
"""

from typing import Any

from app.models import SafetySpec, TtcVerdict
from app.monitor import Monitor, monitor_new

TTC_DEGREE = 1


def ttc_monitor_new(tau: float, horizon: int, spec: SafetySpec) -> Monitor:
    return monitor_new({"tau": tau, "degree": TTC_DEGREE, "horizon": horizon, "spec": spec})


def observe_ttc(monitor: Monitor, x: Any, t: float) -> TtcVerdict | None:
    verdict = monitor.observe(x, t)
    if verdict is None:
        return None
    return TtcVerdict.from_verdict(verdict)
