from __future__ import annotations

import argparse
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from pydantic import ValidationError

# Ensure local `app` package imports work regardless of current working directory.
ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from app.baseline import TTC_DEGREE, ttc_monitor_new
from app.config import Settings, get_settings
from app.csv_io import (
    ABLATION_FIELDS,
    ablation_rows,
    format_float,
    load_json,
    parse_verdict_filename,
    read_trajectory,
    read_verdicts,
    save_json,
    verdict_filename,
    write_predictions,
    write_rows,
    write_trajectory,
    write_verdicts,
)
from app.errors import ConfigurationError, SamplingError, TpmError
from app.metrics import (
    grid_index,
    label_confusion,
    mean_warning_lead,
    min_safety_distance_error,
    rmse_by_lookahead,
    tnr,
    tpr,
    unsafe_entries,
)
from app.models import ExperimentConfig, MonitorVerdict, PredictionSet, SafetySpec, TrajectoryLog
from app.monitor import Monitor, monitor_new, replay
from app.sim import ANALYTIC_DEFAULTS, analytic_log, simulate
from app.systems import BUILTIN_SYSTEMS, builtin_spec, builtin_system, default_tau

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

TRAJECTORY_FILE = "trajectory.csv"
CONFUSION_FILE = "confusion.csv"
Q_METRICS_FILE = "q_metrics.csv"
ABLATION_FILE = "ablation.csv"
STATUS_FILE = "status.json"

CONFUSION_FIELDS = [
    "method",
    "degree",
    "horizon",
    "tp",
    "fp",
    "fn",
    "tn",
    "tpr",
    "tnr",
    "evaluated_steps",
    "warmup_steps",
    "total_steps",
]
Q_METRICS_FIELDS = ["method", "degree", "horizon", "unsafe_entries", "mean_lead_steps", "min_distance_error"]


class MonitorRun:
    def __init__(self, method: str, monitor: Monitor) -> None:
        self.method = method
        self.monitor = monitor
        self.verdicts: list[MonitorVerdict] = []
        self.predictions: list[PredictionSet] = []
        self.latencies_ns: list[int] = []

    @property
    def degree(self) -> int:
        return self.monitor.config.degree

    @property
    def horizon(self) -> int:
        return self.monitor.config.horizon

    def replay(self, log: TrajectoryLog, keep_predictions: bool) -> None:
        for index in range(len(log)):
            state, t = log.states[index], log.times[index]
            start = time.perf_counter_ns()
            try:
                verdict = self.monitor.observe(state, t)
            except SamplingError as exc:
                logger.warning("{} l={} h={}: {}", self.method, self.degree, self.horizon, exc)
                continue
            self.latencies_ns.append(time.perf_counter_ns() - start)
            if verdict is None:
                continue
            self.verdicts.append(verdict)
            if keep_predictions:
                self.predictions.append(self.monitor.last_prediction)


def configure_logging(settings: Settings) -> None:
    logger.remove()
    try:
        logger.add(sys.stderr, level=settings.log_level.upper())
    except ValueError as exc:
        logger.add(sys.stderr, level="INFO")
        raise ConfigurationError(f"invalid log level {settings.log_level!r}: {exc}") from exc


def known_system(name: str) -> bool:
    return name in BUILTIN_SYSTEMS or name in ANALYTIC_DEFAULTS


def load_config(args: argparse.Namespace, settings: Settings) -> ExperimentConfig:
    if args.system is not None and not known_system(args.system):
        raise ConfigurationError(f"unknown system {args.system!r}")
    default_degrees = settings.ablation_degrees if args.command == "ablate" else settings.default_degrees
    try:
        return ExperimentConfig(
            system=args.system,
            input=args.input,
            tau=args.tau,
            degrees=args.degree or default_degrees,
            horizons=args.horizon or settings.default_horizons,
            steps=args.steps if args.steps is not None else settings.default_steps,
            seed=args.seed if args.seed is not None else settings.default_seed,
            substeps=args.substeps if args.substeps is not None else settings.default_substeps,
            baseline=args.baseline,
            save_predictions=args.save_predictions,
            out_dir=args.out_dir or settings.out_dir,
        )
    except ValidationError as exc:
        raise ConfigurationError(f"invalid experiment configuration: {exc}") from exc


def resolve_spec(config: ExperimentConfig) -> SafetySpec:
    if config.system is None:
        return SafetySpec.constant()
    return builtin_spec(config.system)


def load_log(config: ExperimentConfig) -> TrajectoryLog:
    path = config.input or config.out_dir / TRAJECTORY_FILE
    return read_trajectory(path, tau=config.tau)


def update_status(config: ExperimentConfig, command: str, payload: Any) -> None:
    path = config.out_dir / STATUS_FILE
    status = load_json(path, {})
    status[command] = payload
    save_json(path, status)


def cmd_simulate(config: ExperimentConfig) -> int:
    if config.system is None:
        raise ConfigurationError("simulate needs --system")
    tau = config.tau or default_tau(config.system)
    if config.system in BUILTIN_SYSTEMS:
        model, spec = builtin_system(config.system, seed=config.seed)
        log = simulate(model, tau, config.steps, config.substeps)
    else:
        spec = builtin_spec(config.system)
        log = analytic_log(config.system, None, tau, config.steps)

    path = config.out_dir / TRAJECTORY_FILE
    rows = write_trajectory(path, log)
    levels = spec.levels(log.states)
    min_level = float(levels.min())
    final_state = [format_float(v) for v in log.states[-1]]
    print(
        f"Simulated {config.system}: steps={config.steps}, rows={rows}, tau={tau}, "
        f"final_state=[{', '.join(final_state)}], min_safety_level={format_float(min_level)} ({spec.name})"
    )
    update_status(
        config,
        "simulate",
        {
            "system": config.system,
            "seed": config.seed,
            "tau": tau,
            "steps": config.steps,
            "substeps": config.substeps,
            "rows": rows,
            "min_safety_level": min_level,
            "unsafe_entries": len(unsafe_entries(levels)),
            "path": str(path),
        },
    )
    return EXIT_OK


def planned_runs(config: ExperimentConfig, tau: float, spec: SafetySpec) -> list[MonitorRun]:
    runs = []
    for horizon in config.horizons:
        for degree in config.degrees:
            monitor = monitor_new({"tau": tau, "degree": degree, "horizon": horizon, "spec": spec})
            runs.append(MonitorRun("tpm", monitor))
        if config.baseline:
            runs.append(MonitorRun("ttc", ttc_monitor_new(tau, horizon, spec)))
    return runs


def latency_summary(latencies_ns: Sequence[int], percentiles: Sequence[float]) -> dict[str, float]:
    if not latencies_ns:
        return {}
    values = np.percentile(np.asarray(latencies_ns, dtype=float) / 1000.0, percentiles)
    return {f"p{p:g}_us": float(v) for p, v in zip(percentiles, values)}


def cmd_monitor(config: ExperimentConfig) -> int:
    settings = get_settings()
    log = load_log(config)
    spec = resolve_spec(config)
    summaries = []
    for run in planned_runs(config, log.tau, spec):
        run.replay(log, keep_predictions=config.save_predictions)
        path = config.out_dir / verdict_filename(run.method, run.degree, run.horizon)
        rows = write_verdicts(path, run.verdicts)
        if config.save_predictions:
            write_predictions(
                config.out_dir / f"predictions_{run.method}_l{run.degree}_h{run.horizon}.csv",
                run.predictions,
            )
        latency = latency_summary(run.latencies_ns, settings.latency_percentiles)
        warnings = sum(1 for v in run.verdicts if v.warning)
        latency_text = ", ".join(f"{k}={v:.1f}" for k, v in latency.items())
        print(f"{run.method} l={run.degree} h={run.horizon}: {rows} verdicts, {warnings} warnings; latency {latency_text}")
        summaries.append(
            {
                "method": run.method,
                "degree": run.degree,
                "horizon": run.horizon,
                "verdicts": rows,
                "warnings": warnings,
                "latency": latency,
                "status": run.monitor.status().model_dump(),
                "path": str(path),
            }
        )
    update_status(config, "monitor", summaries)
    return EXIT_OK


def verdict_files(out_dir: Path) -> list[tuple[tuple[str, int, int], Path]]:
    found = []
    for path in out_dir.glob("verdicts_*.csv"):
        key = parse_verdict_filename(path.name)
        if key is not None:
            found.append((key, path))
    return sorted(found)


def align_verdicts(log: TrajectoryLog, path: Path) -> tuple[list[bool | None], list[list[float] | None]]:
    warnings: list[bool | None] = [None] * len(log)
    predicted: list[list[float] | None] = [None] * len(log)
    for row in read_verdicts(path):
        index = grid_index(log, row["t"])
        warnings[index] = row["warning"]
        predicted[index] = [row["min_level"]]
    return warnings, predicted


def cmd_evaluate(config: ExperimentConfig) -> int:
    log = load_log(config)
    spec = resolve_spec(config)
    truth_levels = spec.levels(log.states)
    files = verdict_files(config.out_dir)
    if not files:
        raise ConfigurationError(f"no verdict files in {config.out_dir}; run the monitor command first")

    entries = len(unsafe_entries(truth_levels))
    confusion_rows = []
    q_rows = []
    for (method, degree, horizon), path in files:
        warnings, predicted = align_verdicts(log, path)
        counts = label_confusion(truth_levels, warnings, horizon)
        lead = mean_warning_lead(truth_levels, warnings, log.times.tolist(), horizon, log.tau)
        distance_error = min_safety_distance_error(predicted, truth_levels, horizon)
        confusion_rows.append(
            {
                "method": method,
                "degree": degree,
                "horizon": horizon,
                "tp": counts.tp,
                "fp": counts.fp,
                "fn": counts.fn,
                "tn": counts.tn,
                "tpr": format_float(tpr(counts)),
                "tnr": format_float(tnr(counts)),
                "evaluated_steps": counts.evaluated_steps,
                "warmup_steps": counts.warmup_steps,
                "total_steps": counts.total_steps,
            }
        )
        q_rows.append(
            {
                "method": method,
                "degree": degree,
                "horizon": horizon,
                "unsafe_entries": entries,
                "mean_lead_steps": format_float(lead),
                "min_distance_error": format_float(distance_error),
            }
        )
        print(
            f"{method} l={degree} h={horizon}: TP={counts.tp} FP={counts.fp} FN={counts.fn} TN={counts.tn} "
            f"TPR={format_float(tpr(counts))} TNR={format_float(tnr(counts))} "
            f"lead={format_float(lead)} min_distance_error={format_float(distance_error)}"
        )

    write_rows(config.out_dir / CONFUSION_FILE, CONFUSION_FIELDS, confusion_rows)
    write_rows(config.out_dir / Q_METRICS_FILE, Q_METRICS_FIELDS, q_rows)
    update_status(config, "evaluate", {"runs": len(files), "unsafe_entries": entries})
    return EXIT_OK


def ablation_predictions(monitor: Monitor, log: TrajectoryLog) -> list[PredictionSet]:
    return [monitor.last_prediction for _, verdict in replay(monitor, log) if verdict is not None]


def cmd_ablate(config: ExperimentConfig) -> int:
    log = load_log(config)
    horizon = max(config.horizons)
    spec = SafetySpec.constant()
    plan = [("tpm", degree) for degree in config.degrees]
    if config.baseline:
        plan.append(("ttc", TTC_DEGREE))

    rows = []
    for method, degree in plan:
        if method == "ttc":
            monitor = ttc_monitor_new(log.tau, horizon, spec)
        else:
            monitor = monitor_new({"tau": log.tau, "degree": degree, "horizon": horizon, "spec": spec})
        records = rmse_by_lookahead(ablation_predictions(monitor, log), log)
        rows.extend(ablation_rows(method, degree, records))
        if records:
            print(
                f"{method} l={degree}: rmse@{records[0].lookahead_seconds:g}s={format_float(records[0].rmse)}, "
                f"rmse@{records[-1].lookahead_seconds:g}s={format_float(records[-1].rmse)}"
            )

    path = config.out_dir / ABLATION_FILE
    written = write_rows(path, ABLATION_FIELDS, rows)
    update_status(config, "ablate", {"rows": written, "horizon": horizon, "degrees": config.degrees})
    return EXIT_OK


COMMANDS: dict[str, Callable[[ExperimentConfig], int]] = {
    "simulate": cmd_simulate,
    "monitor": cmd_monitor,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=f"{settings.app_name}: predictive safety monitoring experiments.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Simulate a built-in system or analytic trajectory and write trajectory.csv.",
        "monitor": "Replay a trajectory through the predictive monitor and write verdict CSVs.",
        "evaluate": "Score verdict CSVs against the trajectory (confusion.csv, q_metrics.csv).",
        "ablate": "Prediction RMSE per degree and lookahead (ablation.csv).",
    }
    for name, help_text in helps.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--system", help="Built-in system or analytic trajectory kind.")
        sub.add_argument("--input", type=Path, help="Trajectory CSV (default: <out-dir>/trajectory.csv).")
        sub.add_argument("--tau", type=float, help="Sampling interval in seconds.")
        sub.add_argument("--degree", type=int, action="append", help="Taylor degree; repeatable.")
        sub.add_argument("--horizon", type=int, action="append", help="Prediction horizon in steps; repeatable.")
        sub.add_argument("--steps", type=int, help="Number of simulated steps.")
        sub.add_argument("--substeps", type=int, help="RK4 steps per sampling interval.")
        sub.add_argument("--seed", type=int, help="Seed for the built-in systems' schedules.")
        sub.add_argument("--baseline", action="store_true", help="Also run the TTC baseline.")
        sub.add_argument("--save-predictions", action="store_true", help="Also write predicted states.")
        sub.add_argument("--out-dir", type=Path, help="Output directory.")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    args = build_parser(settings).parse_args(argv)
    try:
        configure_logging(settings)
        config = load_config(args, settings)
        return COMMANDS[args.command](config)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TpmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
