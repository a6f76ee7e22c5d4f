"""Result rows, the versioned CSV format and its validator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, List

from .config import AXES, METHODS

__all__ = ["ResultRow", "SCHEMA_LINE", "COLUMNS", "SchemaError", "rows_to_csv", "read_csv",
           "validate_row", "validate_rows", "write_csv"]

SCHEMA_LINE = "# predbeam-results v1"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ResultRow:
    seed: int
    axis_name: str
    axis_value: float
    method: str
    mean_sum_rate: float
    mean_crlb_theta: float
    sqrt_crlb_theta: float
    mean_crlb_dist: float
    sqrt_crlb_dist: float
    violation_rate_theta: float
    violation_rate_dist: float
    mean_power_w: float
    train_seconds: float

    @classmethod
    def from_metrics(cls, seed, axis_name, axis_value, method, metrics: dict,
                     train_seconds: float = 0.0) -> "ResultRow":
        return cls(int(seed), axis_name, float(axis_value), method,
                   *(float(metrics[c]) for c in COLUMNS[4:-1]), float(train_seconds))


COLUMNS = tuple(f.name for f in fields(ResultRow))
_NUMERIC = COLUMNS[4:]


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in asdict(r).values()])
    return buf.getvalue()


def write_csv(rows: Iterable[ResultRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def validate_row(r: ResultRow) -> None:
    """Raise :class:`SchemaError` when a row breaks the result invariants."""
    if r.axis_name not in AXES:
        raise SchemaError(f"unknown axis {r.axis_name!r}")
    if r.method not in METHODS:
        raise SchemaError(f"unknown method {r.method!r}")
    for c in _NUMERIC:
        v = getattr(r, c)
        if not math.isfinite(v):
            raise SchemaError(f"{c} is not finite ({v})")
        if v < 0 and c != "mean_sum_rate":
            raise SchemaError(f"{c} is negative ({v})")
    for mean_col, root_col in (("mean_crlb_theta", "sqrt_crlb_theta"),
                               ("mean_crlb_dist", "sqrt_crlb_dist")):
        m, s = getattr(r, mean_col), getattr(r, root_col)
        if abs(s - math.sqrt(m)) > 1e-12 * max(1.0, math.sqrt(m)):
            raise SchemaError(f"{root_col}={s!r} is not sqrt({mean_col}={m!r})")
    for c in ("violation_rate_theta", "violation_rate_dist"):
        if not 0.0 <= getattr(r, c) <= 1.0:
            raise SchemaError(f"{c} outside [0, 1]")


def validate_rows(rows: Iterable[ResultRow]) -> List[ResultRow]:
    rows = list(rows)
    for i, r in enumerate(rows):
        try:
            validate_row(r)
        except SchemaError as exc:
            raise SchemaError(f"row {i + 1}: {exc}") from None
    return rows


def read_csv(path_or_text, validate: bool = True) -> List[ResultRow]:
    """Parse a results CSV (path or text); checks the schema line and columns."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCHEMA_LINE:
        raise SchemaError(f"missing schema line {SCHEMA_LINE!r}")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header is None:
        raise SchemaError("missing column header")
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    idx = {c: header.index(c) for c in COLUMNS}
    rows = []
    for n, rec in enumerate(reader, start=3):
        if not rec:
            continue
        try:
            vals = {c: rec[idx[c]] for c in COLUMNS}
            rows.append(ResultRow(int(vals["seed"]), vals["axis_name"], float(vals["axis_value"]),
                                  vals["method"], *(float(vals[c]) for c in _NUMERIC)))
        except (IndexError, ValueError) as exc:
            raise SchemaError(f"line {n}: {exc}") from None
    return validate_rows(rows) if validate else rows
