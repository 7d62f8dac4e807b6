import csv
import io
import json
import os
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

from loguru import logger

from moblab.constants import FLOAT_FORMAT
from moblab.exceptions import ArgumentError, BaselineError

BASELINE_PATH = Path(__file__).parent / "baselines.json"
RECORD_ENV = "MOBLAB_RECORD_BASELINES"
SUMMARY_MARKER = "#summary"
# columns read back as text rather than numbers
TEXT_COLUMNS = ("alpha", "family", "label", "kind", "branch")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in TEXT_COLUMNS or text in ("True", "False"):
        return {"True": True, "False": False}.get(text, text)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def report_to_csv(columns: Sequence[str], rows: List[dict], summary: Optional[dict] = None) -> str:
    """
    Rows in `columns` order with floats at 17 significant digits; the
    summary follows as trailer rows "#summary,<key>,<json value>".
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(column)) for column in columns])
    for key, value in (summary or {}).items():
        writer.writerow([SUMMARY_MARKER, key, json.dumps(value, sort_keys=True)])
    return buffer.getvalue()


def report_to_json(columns: Sequence[str], rows: List[dict], summary: Optional[dict] = None) -> str:
    payload = {
        "columns": list(columns),
        "rows": [{column: row.get(column) for column in columns} for row in rows],
        "summary": summary or {},
    }
    return json.dumps(payload, indent=2) + "\n"


def emit(report, fmt: str = "json", path: Optional[Union[str, Path]] = None) -> str:
    """
    Serialize a report holding `columns`, `rows` and `summary`.

    Parameters
    ----------
    report
        SweepReport or any object with those three attributes
    fmt : str
        "csv" or "json"
    path : str or Path, optional
        Destination file; the text is returned either way

    Returns
    -------
    str
        The serialized report
    """
    if fmt == "csv":
        text = report_to_csv(report.columns, report.rows, report.summary)
    elif fmt == "json":
        text = report_to_json(report.columns, report.rows, report.summary)
    else:
        raise ArgumentError(f"Unknown report format {fmt!r}; use 'csv' or 'json'.")
    if path is not None:
        with open(path, "w", newline="") as write_file:
            write_file.write(text)
        logger.info(f"Wrote {len(report.rows)} rows to {path}")
    return text


def format_from_path(path: Union[str, Path], default: str = "json") -> str:
    suffix = Path(path).suffix.lower()
    return {".csv": "csv", ".json": "json"}.get(suffix, default)


def read_report(path: Union[str, Path]) -> Dict[str, object]:
    """
    Read a CSV or JSON report written by `emit` back into
    {"columns", "rows", "summary"}.
    """
    with open(path, "r", newline="") as read_file:
        text = read_file.read()
    if format_from_path(path) == "json":
        return json.loads(text)
    reader = csv.reader(io.StringIO(text))
    columns = next(reader, [])
    rows, summary = list(), dict()
    for record in reader:
        if record and record[0] == SUMMARY_MARKER:
            summary[record[1]] = json.loads(record[2])
            continue
        rows.append({column: _parse_cell(column, cell) for column, cell in zip(columns, record)})
    return {"columns": columns, "rows": rows, "summary": summary}


def load_baselines(path: Union[str, Path] = BASELINE_PATH) -> Dict[str, float]:
    path = Path(path)
    if not path.exists():
        return dict()
    with open(path, "r") as read_file:
        return json.load(read_file)


def save_baselines(baselines: Dict[str, float], path: Union[str, Path] = BASELINE_PATH):
    with open(path, "w") as write_file:
        json.dump(baselines, write_file, indent=2, sort_keys=True)
        write_file.write("\n")


def recording_enabled(environ: Optional[Mapping] = None) -> bool:
    """ True when MOBLAB_RECORD_BASELINES is set to a non-empty value other than 0. """
    environ = os.environ if environ is None else environ
    return environ.get(RECORD_ENV, "").strip() not in ("", "0")


def check_baseline(key: str, value: float, mode: str = "max", tol: float = 0.0,
                   path: Union[str, Path] = BASELINE_PATH, record: Optional[bool] = None) -> bool:
    """
    Compare an oracle-derived constant with the committed baseline.

    Parameters
    ----------
    mode : str
        "max" passes when value <= baseline * (1 + tol); "equal" passes
        when |value - baseline| <= tol
    record : bool, optional
        Store `value` under a missing key instead of failing; defaults
        to the MOBLAB_RECORD_BASELINES environment variable

    Raises
    ------
    BaselineError
        If `key` has no baseline and recording is off
    """
    if mode not in ("max", "equal"):
        raise ArgumentError(f"Unknown baseline mode {mode!r}.")
    if record is None:
        record = recording_enabled()
    baselines = load_baselines(path)
    if key not in baselines:
        if not record:
            raise BaselineError(f"No baseline for {key} in {path}; set {RECORD_ENV}=1 to record {value!r}.")
        logger.warning(f"No baseline for {key}; recording {value!r}.")
        baselines[key] = float(value)
        save_baselines(baselines, path)
        return True
    stored = baselines[key]
    if mode == "max":
        return value <= stored * (1.0 + tol)
    return abs(value - stored) <= tol
