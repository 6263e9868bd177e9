"""On-disk formats: trajectory CSV, raw snapshots with JSON sidecars, JSON reports.

Every writer goes through a temporary file in the target directory followed
by ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .solver import Trajectory
from .spectral import Grid, SpectralVectorField, from_spectral, to_spectral

__all__ = [
    "TRAJECTORY_COLUMNS",
    "atomic_write_text",
    "atomic_write_bytes",
    "trajectory_columns",
    "trajectory_to_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_snapshot",
    "read_snapshot",
    "write_json",
    "json_safe",
]

TRAJECTORY_COLUMNS = ("t", "l1", "l2", "linf", "grad_l2", "div_l2", "energy", "dissipation")


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def json_safe(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path, payload) -> Path:
    return atomic_write_text(path, json.dumps(json_safe(payload), indent=2, sort_keys=True) + "\n")


def trajectory_columns(n_dims: int) -> list[str]:
    return list(TRAJECTORY_COLUMNS) + [f"mean_{j + 1}" for j in range(n_dims)]


def trajectory_to_csv(traj: Trajectory) -> str:
    cols = trajectory_columns(traj.grid.n_dims)
    data = {"t": traj.times}
    for c in cols[1:]:
        data[c] = np.asarray(traj.records[c]) if c in traj.records else np.full(len(traj.times), np.nan)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for i in range(len(traj.times)):
        writer.writerow([repr(float(data[c][i])) for c in cols])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    return atomic_write_text(path, trajectory_to_csv(traj))


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: arr[:, j] for j, name in enumerate(header)}


def write_snapshot(field: SpectralVectorField, t: float, path) -> tuple[Path, Path]:
    """Physical values as little-endian float64 (C order, shape ``(n,) + grid.shape``) plus ``<path>.json``."""
    path = Path(path)
    values = np.ascontiguousarray(from_spectral(field), dtype="<f8")
    raw = atomic_write_bytes(path, values.tobytes(order="C"))
    sidecar = write_json(
        path.with_name(path.name + ".json"),
        {
            "t": float(t),
            "shape": list(values.shape),
            "dtype": "float64",
            "byte_order": "little",
            "order": "C",
            "grid": field.grid.to_dict(),
        },
    )
    return raw, sidecar


def read_snapshot(path) -> tuple[SpectralVectorField, float]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    g = meta["grid"]
    grid = Grid(int(g["n_dims"]), float(g["box_length"]), int(g["resolution"]))
    values = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(meta["shape"])
    return to_spectral(values.astype(float), grid), float(meta["t"])
