"""Reading and writing dissimilarity matrices (CSV or JSON) and report JSON."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import MalformedInput


@dataclass
class MatrixFile:
    matrix: np.ndarray
    labels: Optional[list] = None
    meta: dict = field(default_factory=dict)
    digest: str = ""

    @property
    def tolerance(self) -> float:
        return float(self.meta.get("tolerance", 0.0))


def _guess_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    return "json" if path.suffix.lower() == ".json" else "csv"


def parse_csv(text: str) -> MatrixFile:
    """Rows of comma-separated numbers; ``# key: value`` lines carry metadata.

    Recognized keys: ``labels`` (comma-separated names) and ``tolerance``.
    """
    meta = {}
    labels = None
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            key = key.strip().lower()
            if not sep:
                continue
            if key == "labels":
                labels = [s.strip() for s in next(csv.reader([value.strip()]))]
            elif key == "tolerance":
                try:
                    meta["tolerance"] = float(value)
                except ValueError:
                    raise MalformedInput(f"bad tolerance header: {value.strip()!r}") from None
            else:
                meta[key] = value.strip()
            continue
        body.append(line)
    if not body:
        raise MalformedInput("no matrix rows found")
    rows = []
    for lineno, row in enumerate(csv.reader(body), 1):
        try:
            rows.append([float(x) for x in row])
        except ValueError:
            raise MalformedInput(f"row {lineno}: non-numeric entry in {row!r}") from None
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() != len(rows):
        raise MalformedInput(f"expected a square matrix, got {len(rows)} rows of widths "
                             f"{sorted({len(r) for r in rows})}")
    return MatrixFile(np.array(rows), labels, meta)


def parse_json(text: str) -> MatrixFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from None
    if isinstance(data, list):
        data = {"matrix": data}
    if not isinstance(data, dict) or "matrix" not in data:
        raise MalformedInput("JSON input needs a 'matrix' field")
    try:
        matrix = np.array(data["matrix"], dtype=float)
    except (TypeError, ValueError):
        raise MalformedInput("'matrix' is not a numeric matrix") from None
    meta = {}
    if "tolerance" in data:
        meta["tolerance"] = float(data["tolerance"])
    return MatrixFile(matrix, data.get("labels"), meta)


def read_matrix(path, fmt: Optional[str] = None) -> MatrixFile:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedInput(f"{path} is not UTF-8 text") from None
    kind = _guess_format(path, fmt)
    parsed = parse_json(text) if kind == "json" else parse_csv(text)
    parsed.digest = hashlib.sha256(raw).hexdigest()
    return parsed


def read_json(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
        return json.loads(raw.decode("utf-8")), hashlib.sha256(raw).hexdigest()
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"invalid JSON in {path}: {exc}") from None


def format_csv(matrix, labels=None, tolerance: Optional[float] = None) -> str:
    """CSV text with ``repr`` floats, so values round-trip exactly."""
    buf = io.StringIO()
    if labels is not None:
        buf.write("# labels: " + ",".join(labels) + "\n")
    if tolerance is not None:
        buf.write(f"# tolerance: {float(tolerance)!r}\n")
    for row in np.asarray(matrix, dtype=float):
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def write_csv(path, matrix, labels=None, tolerance: Optional[float] = None):
    Path(path).write_text(format_csv(matrix, labels, tolerance))


def dumps(obj) -> str:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))
