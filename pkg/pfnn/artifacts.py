"""Run artifacts: atomic file writes and the JSON layout of an output directory."""

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence

SOLUTION_CSV = "solution.csv"
REPORT_JSON = "report.json"
STUDY_CSV = "study.csv"
STUDY_JSON = "study.json"
RECURRENT_JSON = "recurrent.json"
METRICS_JSONL = "metrics.jsonl"
MODEL_JSON = "model.json"
ENSEMBLE_JSON = "ensemble.json"
TRAIN_CSV = "train_field.csv"
TEST_CSV = "test_field.csv"
VALIDATE_JSON = "validate.json"
ERROR_JSON = "error.json"
REPRODUCTION_JSON = "reproduction.json"
TIMING_JSON = "timing.json"  # wall-clock times; the only artifact that differs between identical runs


def write_atomic(path: Path, content: str):
    """Write through a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def to_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path: Path, data):
    write_atomic(path, to_json(_finite(data)))


def read_json(path: Path) -> Optional[dict]:
    path = Path(path)
    if not path.is_file():
        return None
    return json.loads(path.read_text())


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else repr(row[c]) if isinstance(row[c], float) else row[c]
                         for c in columns])
    return buffer.getvalue()


def write_error(out_dir: Path, command: str, error: BaseException):
    """error.json {"error", "type", "command"} plus any structured fields the exception carries."""
    payload = {"error": str(error), "type": type(error).__name__, "command": command}
    problems = getattr(error, "problems", None)
    if problems:
        payload["problems"] = list(problems)
    write_json(Path(out_dir) / ERROR_JSON, payload)


def clear_error(out_dir: Path):
    (Path(out_dir) / ERROR_JSON).unlink(missing_ok=True)


def _finite(data):
    """Replace non-finite floats by None so the JSON stays strict."""
    if isinstance(data, dict):
        return {k: _finite(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_finite(v) for v in data]
    if isinstance(data, float) and (data != data or data in (float("inf"), float("-inf"))):
        return None
    return data
