"""Readers and writers: two-column CSV data, deterministic CSV/JSON reports."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

SCHEMA_VERSION = "1"


def read_two_column_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a two-column numeric CSV; the first row may be a header.

    Raises ParseError with the line number for malformed rows and DataError
    for an empty file.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    col1, col2 = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 columns, got {len(parts)}")
            try:
                a, b = float(parts[0]), float(parts[1])
            except ValueError:
                if lineno == 1 and not col1:
                    continue  # header row
                raise ParseError(path, lineno, f"non-numeric row: {line!r}")
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ParseError(path, lineno, f"non-finite value: {line!r}")
            col1.append(a)
            col2.append(b)
    if not col1:
        raise DataError(f"{path}: no data rows")
    return np.array(col1), np.array(col2)


def _format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        if not np.isfinite(v):
            return None if np.isnan(v) else ("inf" if v > 0 else "-inf")
        return float(f"{float(v):.12g}")
    if isinstance(v, np.ndarray):
        return [_format_value(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _format_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_format_value(x) for x in v]
    return v


def write_json_report(path, payload: dict) -> None:
    """Stable JSON: schema_version stamp, sorted keys, 12 significant digits.

    Identical inputs produce byte-identical files.
    """
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_format_value(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header: list, rows) -> None:
    """UTF-8, comma separated, dot decimal, 12 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(f"{float(v):.12g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
