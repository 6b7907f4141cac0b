"""Deterministic JSON and CSV output."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

__all__ = ["plain", "to_json", "to_csv"]


def plain(value):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as strings.

    Dict order is kept, so the caller fixes the field order once.
    """
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_dict"):
        return plain(value.to_dict())
    return str(value)


def to_json(report) -> str:
    # float repr is the shortest string that round-trips, at most 17 digits
    return json.dumps(plain(report), indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = plain(v)
    return v if isinstance(v, str) else repr(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row.get(h)) for h in header])
    return buf.getvalue()
