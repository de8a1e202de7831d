"""Reading and writing run artifacts.

JSON files hold {"metadata": ..., "result": ...}.  CSV files start with one
comment line ``# metadata: <json>`` followed by a header row.  Floats are written
with repr(), so re-parsing returns exactly the same values.  Log-domain numbers
are always written as a (sign, log10_magnitude) pair.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .quadrature import LogValue

TOOL = "explosion-lab"
META_PREFIX = "# metadata: "


def metadata(command: str, config: dict, seed: Optional[int] = None,
             convention: Optional[str] = None) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config": config,
        "convention": convention,
        "seed": seed,
    }


def logvalue_fields(v: Optional[LogValue]) -> dict:
    if v is None:
        return {"sign": None, "log10_magnitude": None}
    return {"sign": v.sign, "log10_magnitude": v.log10_magnitude if v.sign else None}


def logvalue_from_fields(d: dict) -> Optional[LogValue]:
    if d.get("sign") is None:
        return None
    if d["sign"] == 0:
        return LogValue.zero()
    return LogValue(int(d["sign"]), float(d["log10_magnitude"]) * math.log(10.0))


def to_jsonable(obj):
    """Convert dataclasses / numpy / LogValue trees into plain JSON types."""
    if isinstance(obj, LogValue):
        return logvalue_fields(obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(meta: dict, result) -> str:
    return json.dumps({"metadata": meta, "result": to_jsonable(result)}, indent=2,
                      allow_nan=False) + "\n"


def dumps_csv(meta: dict, header: list[str], rows: Iterable) -> str:
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps(meta, allow_nan=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for v in row])
    return buf.getvalue()


def write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_csv(path) -> tuple[dict, list[dict]]:
    """Return (metadata, rows); numeric cells come back as float, blanks as None."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(META_PREFIX):
        raise ValueError(f"{path}: missing metadata header")
    meta = json.loads(lines[0][len(META_PREFIX):])
    rows = []
    for rec in csv.DictReader(lines[1:]):
        rows.append({k: _parse_cell(v) for k, v in rec.items()})
    return meta, rows


def _parse_cell(v: str):
    if v == "":
        return None
    try:
        return float(v)
    except ValueError:
        return v
