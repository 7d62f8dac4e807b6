import json

import pytest

from moblab import file_io
from moblab.exceptions import ArgumentError, BaselineError
from moblab.sweep import REPORT_COLUMNS, SweepReport

ROW = {
    "theta": 0.9,
    "k": 3,
    "x": 1000,
    "y": 501,
    "alpha": "1/2",
    "family": "rational",
    "label": "A",
    "a": 1,
    "q": 2,
    "lambda": 0.0,
    "abs_S": 3.1415926535897931,
    "abs_S_over_y": 3.1415926535897931 / 501,
    "major_arc_term": 1060.6601717798212,
    "lemma31_rhs": None,
    "weyl_abs": 0.1,
}


def test_empty_report():
    assert file_io.report_to_csv(REPORT_COLUMNS, []) == ",".join(REPORT_COLUMNS) + "\n"
    payload = json.loads(file_io.report_to_json(REPORT_COLUMNS, []))
    assert payload == {"columns": list(REPORT_COLUMNS), "rows": [], "summary": {}}


def test_single_row_round_trip(tmp_path):
    report = SweepReport([ROW], {"n_rows": 1, "groups": {"theta=0.9,k=3": {"y": 501}}})
    for suffix in ("csv", "json"):
        path = tmp_path / f"report.{suffix}"
        text = report.emit(suffix, path)
        assert path.read_text() == text
        back = file_io.read_report(path)
        assert back["columns"] == list(REPORT_COLUMNS)
        assert back["rows"] == [ROW]
        assert back["summary"] == report.summary


def test_csv_layout():
    text = file_io.report_to_csv(("alpha", "abs_S", "lemma31_rhs"), [ROW], {"trivial_bound_ok": True})
    lines = text.splitlines()
    assert lines[0] == "alpha,abs_S,lemma31_rhs"
    assert lines[1] == "1/2,3.1415926535897931,"
    assert lines[2] == "#summary,trivial_bound_ok,true"


def test_emit_errors():
    with pytest.raises(ArgumentError):
        file_io.emit(SweepReport([], {}), "xml")
    assert file_io.format_from_path("out.CSV") == "csv"
    assert file_io.format_from_path("out.txt") == "json"


def test_check_baseline(tmp_path):
    path = tmp_path / "baselines.json"
    with pytest.raises(BaselineError):
        file_io.check_baseline("constant", 2.0, path=path, record=False)
    assert not path.exists()
    assert file_io.check_baseline("constant", 2.0, path=path, record=True)
    assert file_io.load_baselines(path) == {"constant": 2.0}
    assert file_io.check_baseline("constant", 1.5, path=path)
    assert not file_io.check_baseline("constant", 2.1, path=path)
    assert file_io.check_baseline("constant", 2.1, tol=0.1, path=path)
    assert file_io.check_baseline("constant", 2.0 + 1e-12, "equal", 1e-9, path=path)
    assert not file_io.check_baseline("constant", 1.5, "equal", 1e-9, path=path)
    with pytest.raises(ArgumentError):
        file_io.check_baseline("constant", 1.0, "min", path=path)


def test_missing_baseline_needs_opt_in(tmp_path, monkeypatch):
    path = tmp_path / "baselines.json"
    monkeypatch.delenv(file_io.RECORD_ENV, raising=False)
    with pytest.raises(BaselineError):
        file_io.check_baseline("unseen", 1e9, path=path)
    monkeypatch.setenv(file_io.RECORD_ENV, "0")
    with pytest.raises(BaselineError):
        file_io.check_baseline("unseen", 1e9, path=path)
    monkeypatch.setenv(file_io.RECORD_ENV, "1")
    assert file_io.check_baseline("unseen", 1e9, path=path)
    assert file_io.load_baselines(path) == {"unseen": 1e9}
    assert file_io.recording_enabled({file_io.RECORD_ENV: "yes"})
    assert not file_io.recording_enabled({})


def test_committed_baselines():
    baselines = file_io.load_baselines()
    for k in (3, 4):
        assert f"gauss_bound_constant_k{k}_q2000" in baselines
    for label in "ABC":
        assert 0 < baselines[f"sweep_x1e6_theta0.85_k3_max_abs_S_over_y_{label}"] < 1
    assert 0 < baselines["lemma31_c_obs_x1e5_y1e4_k3_q50"] <= 1
