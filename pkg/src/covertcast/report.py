"""Deterministic serialization of result rows (JSON, CSV, JSONL)."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if hasattr(v, "item"):  # numpy scalars
        return _clean(v.item())
    return v


def _columns(rows: Sequence[dict]) -> list[str]:
    cols: list[str] = []
    seen = set()
    for r in rows:
        for k in r:
            if k not in seen:
                seen.add(k)
                cols.append(k)
    return cols


def _cell(v) -> str:
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(rows: Sequence[dict] | dict, fmt: str = "json") -> str:
    if fmt == "json":
        if isinstance(rows, dict):
            payload = {k: _clean(v) for k, v in rows.items()}
        else:
            payload = [{k: _clean(v) for k, v in r.items()} for r in rows]
        return json.dumps(payload, indent=2, sort_keys=True, default=_clean) + "\n"
    if fmt == "csv":
        if isinstance(rows, dict):
            rows = [rows]
        buf = io.StringIO()
        cols = _columns(rows)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def write_table(rows, path: str | Path | None, fmt: str = "json") -> None:
    text = render(rows, fmt)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps({k: _clean(v) for k, v in r.items()}, sort_keys=True) + "\n")
