"""Deterministic CSV/JSON emission and observation ingestion."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.{SIG_DIGITS}g}"
    return "0" if out == "-0" else out


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True, ensure_ascii=False)
                    + "\n", encoding="utf-8")
    return path


def read_observations(path):
    """Observations from a CSV with columns phi_sq, frequency[, weight][, branch].

    Flux in flux quanta, frequency in GHz.
    """
    from .estimate import Observation

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"phi_sq", "frequency"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(Observation(float(row["phi_sq"]), float(row["frequency"]),
                                   float(row.get("weight") or 1.0), int(row.get("branch") or 0)))
    if not out:
        raise ValueError(f"{path}: no observations")
    return out
