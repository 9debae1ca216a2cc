"""Artifact serialisation: deterministic JSON, 17-significant-digit CSV, grid functions."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .grids import Grid

FLOAT_FMT = "{:.17g}"


def to_jsonable(obj):
    """Recursively convert numpy containers/scalars; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow([FLOAT_FMT.format(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_grid_function(path, points: np.ndarray, values: np.ndarray, extra: Optional[dict] = None) -> Path:
    """CSV with columns ``x0..x{d-1}, value`` (plus optional named extra columns)."""
    points = np.atleast_2d(points)
    d = points.shape[1]
    header = [f"x{i}" for i in range(d)] + ["value"]
    cols = [points, np.asarray(values, float)[:, None]]
    for name, arr in (extra or {}).items():
        arr = np.asarray(arr, float).reshape(len(points), -1)
        header += [f"{name}{i}" if arr.shape[1] > 1 else name for i in range(arr.shape[1])]
        cols.append(arr)
    data = np.hstack(cols)
    return write_csv(path, header, (list(map(float, r)) for r in data))


def read_grid_function(path):
    """Returns ``(points (N, d), values (N,))`` from a grid-function CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    d = header.index("value")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(header))
    return data[:, :d], data[:, d]


def operator_report(operator: str, t1: float, t2: float, grid: Grid, values, maximizers) -> dict:
    return {
        "operator": operator,
        "t1": t1,
        "t2": t2,
        "grid": {"lower": list(grid.lower), "upper": list(grid.upper), "shape": list(grid.shape)},
        "values": np.asarray(values).tolist(),
        "maximizers": np.asarray(maximizers).tolist(),
    }
