from pathlib import Path

import numpy as np
import pytest

from app.csv_io import (
    format_float,
    load_json,
    parse_verdict_filename,
    read_trajectory,
    read_verdicts,
    save_json,
    verdict_filename,
    write_predictions,
    write_trajectory,
    write_verdicts,
)
from app.errors import ParseError
from app.models import MonitorVerdict, PredictionSet
from app.sim import analytic_log


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_format_float() -> None:
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert format_float(None) == "N/A"


def test_trajectory_keeps_full_precision(tmp_path: Path) -> None:
    log = analytic_log("oscillator", {"omega": 0.7}, 0.033, 40)
    path = tmp_path / "trajectory.csv"
    assert write_trajectory(path, log) == 41

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x0,x1"
    loaded = read_trajectory(path)
    assert loaded.tau == pytest.approx(0.033)
    np.testing.assert_array_equal(loaded.states, log.states)
    np.testing.assert_array_equal(loaded.times, log.times)
    assert loaded.provenance == "external"


def test_read_trajectory_with_explicit_tau(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0\n0,1\n0.5,2\n1.0,3\n")
    assert read_trajectory(path, tau=0.5).states[:, 0].tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ParseError) as exc:
        read_trajectory(path, tau=0.25)
    assert exc.value.line == 3


def test_read_trajectory_rejects_bad_header(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "time,x\n0,1\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 1
    assert str(exc.value).startswith("line 1:")


def test_read_trajectory_reports_bad_number_line(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0\n0,1\n0.1,oops\n0.2,3\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 3
    assert "x0" in str(exc.value)


def test_read_trajectory_reports_missing_column(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0,x1\n0,1,2\n0.1,3\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 3


def test_read_trajectory_rejects_non_finite_values(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0\n0,1\n0.1,nan\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 3


def test_read_trajectory_rejects_uneven_spacing(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0\n0,1\n0.1,2\n0.2,3\n0.35,4\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 5


def test_read_trajectory_rejects_decreasing_time(tmp_path: Path) -> None:
    path = _write(tmp_path / "log.csv", "t,x0\n1,1\n0.9,2\n")
    with pytest.raises(ParseError) as exc:
        read_trajectory(path)
    assert exc.value.line == 3


def test_read_trajectory_needs_two_samples(tmp_path: Path) -> None:
    with pytest.raises(ParseError):
        read_trajectory(_write(tmp_path / "log.csv", "t,x0\n0,1\n"))
    with pytest.raises(ParseError):
        read_trajectory(_write(tmp_path / "empty.csv", ""))
    with pytest.raises(ParseError):
        read_trajectory(tmp_path / "missing.csv")


def test_verdict_filenames() -> None:
    assert verdict_filename("ttc", 1, 50) == "verdicts_ttc_l1_h50.csv"
    assert parse_verdict_filename("verdicts_tpm_l12_h100.csv") == ("tpm", 12, 100)
    assert parse_verdict_filename("predictions_tpm_l2_h50.csv") is None


def test_verdict_rows(tmp_path: Path) -> None:
    verdicts = [
        MonitorVerdict.from_levels(0.5, np.array([0.25, 0.125])),
        MonitorVerdict.from_levels(0.75, np.array([0.25, -0.5])),
    ]
    path = tmp_path / "verdicts_tpm_l1_h2.csv"
    assert write_verdicts(path, verdicts) == 2
    assert path.read_text(encoding="utf-8") == (
        "t,min_level,first_violation,warning\n0.5,0.125,,0\n0.75,-0.5,2,1\n"
    )

    rows = read_verdicts(path)
    assert rows[0] == {"t": 0.5, "min_level": 0.125, "first_violation": None, "warning": False}
    assert rows[1] == {"t": 0.75, "min_level": -0.5, "first_violation": 2, "warning": True}


def test_read_verdicts_validates_rows(tmp_path: Path) -> None:
    path = _write(tmp_path / "v.csv", "t,min_level,first_violation,warning\n0,1,,0\n0.1,1,,yes\n")
    with pytest.raises(ParseError) as exc:
        read_verdicts(path)
    assert exc.value.line == 3

    with pytest.raises(ParseError):
        read_verdicts(_write(tmp_path / "w.csv", "t,level\n0,1\n"))

    path = _write(tmp_path / "x.csv", "t,min_level,first_violation,warning\n0,1,,0\n0.1,1,two,1\n")
    with pytest.raises(ParseError) as exc:
        read_verdicts(path)
    assert exc.value.line == 3
    assert "first_violation" in str(exc.value)

    path = _write(tmp_path / "y.csv", "t,min_level,first_violation,warning\n0,-1,0,1\n")
    with pytest.raises(ParseError) as exc:
        read_verdicts(path)
    assert exc.value.line == 2


def test_write_predictions(tmp_path: Path) -> None:
    prediction = PredictionSet(base_time=0.5, tau=0.25, states=np.array([[1.0, 2.0], [1.5, 2.5]]))
    path = tmp_path / "predictions.csv"
    assert write_predictions(path, [prediction]) == 2
    assert path.read_text(encoding="utf-8").splitlines() == ["t,m,x0,x1", "0.5,1,1,2", "0.5,2,1.5,2.5"]


def test_json_helpers(tmp_path: Path) -> None:
    path = tmp_path / "nested" / "status.json"
    assert load_json(path, {"empty": True}) == {"empty": True}
    save_json(path, {"runs": 3})
    assert load_json(path, {}) == {"runs": 3}
    path.write_text("{not json", encoding="utf-8")
    assert load_json(path, []) == []
