"""Serialization of snapshots, diagnostics, Hodge splits and run manifests.

Floats are written with Python's shortest round-trip ``repr``, so every value
read back is bit-identical to the one written.  Output files are produced in a
deterministic order with sorted keys where order is otherwise free.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import ImmersionField, ParamGrid

DIAGNOSTIC_COLUMNS = ("t", "area", "omega_max", "H_sq_max", "min_eig_g")


def diagnostic_header(n: int) -> list:
    """Fixed column order: ``t, area, omega_max, H_sq_max, min_eig_g, period_1..period_n``."""
    return list(DIAGNOSTIC_COLUMNS) + [f"period_{k + 1}" for k in range(n)]


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: Optional[int] = None) -> str:
    return json.dumps(obj, default=_plain, sort_keys=True, indent=indent, allow_nan=True)


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj, indent: Optional[int] = None) -> Path:
    return atomic_write_text(path, dumps(obj, indent) + "\n")


# ---------------------------------------------------------------- snapshots


def snapshot_to_dict(F: ImmersionField, t: float, theta: Optional[np.ndarray] = None) -> dict:
    out = {
        "t": float(t),
        "n": F.n,
        "sizes": list(F.grid.sizes),
        "scheme": F.grid.scheme,
        "winding": F.winding,
        "F": F.values,
    }
    if theta is not None:
        out["theta"] = np.asarray(theta, dtype=float)
    return out


def snapshot_from_dict(data: dict):
    """Inverse of :func:`snapshot_to_dict`; returns ``(t, F, theta or None)``."""
    try:
        grid = ParamGrid(tuple(int(s) for s in data["sizes"]), data.get("scheme", "spectral"))
        F = ImmersionField(grid, np.asarray(data["F"], dtype=float), np.asarray(data["winding"], dtype=float))
        t = float(data.get("t", 0.0))
    except KeyError as exc:
        raise ValueError(f"snapshot is missing field {exc}") from None
    theta = data.get("theta")
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != grid.sizes + (grid.n,):
            raise ValueError(f"theta has shape {theta.shape}, expected {grid.sizes + (grid.n,)}")
    return t, F, theta


def write_snapshot(path, F: ImmersionField, t: float, theta: Optional[np.ndarray] = None) -> Path:
    return write_json(path, snapshot_to_dict(F, t, theta))


def read_snapshot(path):
    with open(path) as fh:
        return snapshot_from_dict(json.load(fh))


# -------------------------------------------------------------- diagnostics


def diagnostics_csv_text(rows: Iterable[Sequence[float]], n: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(diagnostic_header(n))
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_diagnostics_csv(path, record, n: int) -> Path:
    """One row per record time of a :class:`~lagflow.flow.FlowRecord`."""
    return atomic_write_text(path, diagnostics_csv_text((d.row() for d in record.diagnostics), n))


def read_diagnostics_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def write_periods_csv(path, periods: Sequence[float]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["loop", "period"])
    for k, p in enumerate(periods):
        writer.writerow([k + 1, repr(float(p))])
    return atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------- hodge


def hodge_to_dict(split) -> dict:
    return {
        "basepoint": list(split.basepoint),
        "iterations": int(split.iterations),
        "relative_residual": float(split.relative_residual),
        "phi": split.phi,
        "psi": split.psi,
        "max_abs_psi": float(np.abs(split.psi).max()),
    }


# ---------------------------------------------------------------- pictures


def curve_svg(F: ImmersionField, lattice: Optional[Sequence] = None, size: int = 400, margin: int = 10) -> str:
    """Closed polyline of a curve in C (positions reduced modulo ``lattice``)."""
    if F.n != 1:
        raise ValueError("SVG output is only defined for curves (n = 1)")
    pts = F.wrapped(lattice)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (size - 2 * margin) / span
    # flip y so the picture has the usual orientation
    xs = margin + (pts[:, 0] - lo[0]) * scale
    ys = size - margin - (pts[:, 1] - lo[1]) * scale
    coords = " ".join(f"{x:.4f},{y:.4f}" for x, y in zip(xs, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'  <polygon points="{coords}" fill="none" stroke="black" stroke-width="1"/>\n'
        "</svg>\n"
    )


def write_curve_svg(path, F: ImmersionField, lattice: Optional[Sequence] = None) -> Path:
    return atomic_write_text(path, curve_svg(F, lattice))


# ---------------------------------------------------------------- manifest


@dataclass
class RunManifest:
    """Record of one CLI invocation.

    ``config`` is the fully resolved configuration; feeding it back through
    ``--config`` reproduces the run.
    """

    command: str
    config: dict
    version: str
    scheme: str
    grid: list
    scenario: object
    outputs: list = field(default_factory=list)
    wall_clock: float = 0.0
    exit_code: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> Path:
        return write_json(path, self.to_dict(), indent=2)

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))
