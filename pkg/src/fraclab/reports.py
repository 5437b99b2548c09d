"""CSV and JSON writers with deterministic formatting.

Floats are written with ``repr`` (shortest round-trip form) and rows keep
the order they were produced in, so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .inequality import REPORT_FIELDS

__all__ = ["REPORT_FIELDS", "format_value", "write_csv", "to_plain", "write_json", "write_jsonl"]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return "" if v is None else str(v)


def write_csv(rows: Iterable[dict], path: str | Path, fields=REPORT_FIELDS) -> Path:
    """One line per row; an empty iterable gives the header alone."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([format_value(r.get(k)) for k in fields])
    return path


def to_plain(obj):
    """Recursively convert numpy types and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_jsonl(records: Iterable, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(to_plain(r), sort_keys=True) + "\n")
    return path
