"""CSV / JSON emission of result records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

from .sweep import ResultRecord

CSV_COLUMNS = tuple(f.name for f in fields(ResultRecord))
_TEXT = ("scheme", "scenario", "sweep_name")


def _fmt(value):
    return format(value, ".17g")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([getattr(r, c) if c in _TEXT else _fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float):
        # 17 significant digits round-trip every double; JSON has no NaN
        return None if math.isnan(v) else float(_fmt(v))
    return v


def records_to_json(records) -> str:
    rows = [{k: _json_value(v) for k, v in asdict(r).items()} for r in records]
    return json.dumps(rows, indent=2) + "\n"


def records_from_json(text):
    out = []
    for row in json.loads(text):
        row = {k: (math.nan if v is None else v) for k, v in row.items()}
        out.append(ResultRecord(**row))
    return out


def emit_results(records, path=None, fmt="csv"):
    """Write records as CSV (fixed header) or a JSON array; ``path=None`` returns the text only."""
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text
