import csv
import json
import re
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from app.errors import ParseError
from app.models import AblationRecord, MonitorVerdict, PredictionSet, TrajectoryLog

FLOAT_FORMAT = ".17g"
SPACING_TOLERANCE = 1e-6
NOT_AVAILABLE = "N/A"

VERDICT_FIELDS = ["t", "min_level", "first_violation", "warning"]
ABLATION_FIELDS = ["method", "degree", "lookahead_steps", "lookahead_seconds", "rmse", "mean", "std"]
VERDICT_FILE_RE = re.compile(r"^verdicts_(?P<method>[a-z]+)_l(?P<degree>\d+)_h(?P<horizon>\d+)\.csv$")


def format_float(value: float | None) -> str:
    if value is None:
        return NOT_AVAILABLE
    return format(float(value), FLOAT_FORMAT)


def load_json(path: Path, default: Any) -> Any:
    if not path.exists():
        return default
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except Exception:
        return default


def save_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")


def write_rows(path: Path, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def write_trajectory(path: Path, log: TrajectoryLog) -> int:
    fieldnames = ["t", *(f"x{d}" for d in range(log.dim))]
    rows = (
        {"t": format_float(t), **{f"x{d}": format_float(v) for d, v in enumerate(state)}}
        for t, state in zip(log.times.tolist(), log.states.tolist())
    )
    return write_rows(path, fieldnames, rows)


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {column!r} is not a number: {text!r}", line) from None
    if not np.isfinite(value):
        raise ParseError(f"column {column!r} is not finite: {text!r}", line)
    return value


def read_trajectory(path: Path, tau: float | None = None) -> TrajectoryLog:
    """Load a ``t,x0,...,x{n-1}`` trajectory CSV.

    When ``tau`` is omitted the sampling interval is taken from the first two
    rows; either way every row must follow the previous one by tau.
    """
    if not path.exists():
        raise ParseError(f"trajectory file {path} does not exist")
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ParseError("trajectory file is empty", 1)
        header = [name.strip() for name in header]
        expected = ["t", *(f"x{d}" for d in range(len(header) - 1))]
        if len(header) < 2 or header != expected:
            raise ParseError(f"header must be t,x0,...,x{{n-1}}, got {','.join(header)}", 1)

        times: list[float] = []
        states: list[list[float]] = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(row)}", line)
            values = [_parse_float(text, line, name) for text, name in zip(row, header)]
            if times:
                gap = values[0] - times[-1]
                if tau is None:
                    if gap <= 0:
                        raise ParseError("timestamps must be strictly increasing", line)
                    tau = gap
                if abs(gap - tau) > SPACING_TOLERANCE * tau:
                    raise ParseError(f"sample is {gap} s after the previous one, expected {tau} s", line)
            times.append(values[0])
            states.append(values[1:])

    if len(times) < 2:
        raise ParseError("trajectory needs at least two samples")
    return TrajectoryLog(tau=tau, times=times, states=states, provenance="external")


def verdict_filename(method: str, degree: int, horizon: int) -> str:
    return f"verdicts_{method}_l{degree}_h{horizon}.csv"


def parse_verdict_filename(name: str) -> tuple[str, int, int] | None:
    match = VERDICT_FILE_RE.match(name)
    if not match:
        return None
    return match.group("method"), int(match.group("degree")), int(match.group("horizon"))


def write_verdicts(path: Path, verdicts: Iterable[MonitorVerdict]) -> int:
    rows = (
        {
            "t": format_float(v.at_time),
            "min_level": format_float(v.min_level),
            "first_violation": "" if v.first_violation is None else v.first_violation,
            "warning": int(v.warning),
        }
        for v in verdicts
    )
    return write_rows(path, VERDICT_FIELDS, rows)


def _parse_violation(text: str, line: int, name: str) -> int | None:
    if not text:
        return None
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{name}: first_violation must be an integer, got {text!r}", line) from None
    if value < 1:
        raise ParseError(f"{name}: first_violation must be at least 1, got {value}", line)
    return value


def read_verdicts(path: Path) -> list[dict[str, Any]]:
    """Rows of a verdicts CSV as dicts with ``t``, ``min_level``, ``first_violation``, ``warning``."""
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != VERDICT_FIELDS:
            raise ParseError(f"{path.name}: header must be {','.join(VERDICT_FIELDS)}", 1)
        parsed = []
        for row in reader:
            line = reader.line_num
            violation = row["first_violation"].strip()
            warning = row["warning"].strip()
            if warning not in {"0", "1"}:
                raise ParseError(f"{path.name}: warning must be 0 or 1, got {warning!r}", line)
            parsed.append(
                {
                    "t": _parse_float(row["t"], line, "t"),
                    "min_level": _parse_float(row["min_level"], line, "min_level"),
                    "first_violation": _parse_violation(violation, line, path.name),
                    "warning": warning == "1",
                }
            )
    return parsed


def write_predictions(path: Path, predictions: Iterable[PredictionSet]) -> int:
    rows = []
    dim = None
    for prediction in predictions:
        dim = prediction.states.shape[1]
        for m, state in enumerate(prediction.states.tolist(), start=1):
            rows.append(
                {
                    "t": format_float(prediction.base_time),
                    "m": m,
                    **{f"x{d}": format_float(v) for d, v in enumerate(state)},
                }
            )
    fieldnames = ["t", "m", *(f"x{d}" for d in range(dim or 0))]
    return write_rows(path, fieldnames, rows)


def ablation_rows(method: str, degree: int, records: Iterable[AblationRecord]) -> list[dict[str, Any]]:
    return [
        {
            "method": method,
            "degree": degree,
            "lookahead_steps": r.lookahead_steps,
            "lookahead_seconds": format_float(r.lookahead_seconds),
            "rmse": format_float(r.rmse),
            "mean": format_float(r.mean_error),
            "std": format_float(r.std_error),
        }
        for r in records
    ]
