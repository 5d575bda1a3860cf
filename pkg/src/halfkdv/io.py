"""CSV, field and manifest persistence.

All numbers are written with ``%.17g`` so files round-trip exactly and
identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Field, Side, make_grid, read_field, write_field
from .solver import SolverConfig, Trajectory, zero_boundary


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path: str | Path) -> dict:
    """Read a numeric CSV written by :func:`write_csv` into column arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {k: data[:, i] for i, k in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Side):
        return obj.value
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: str | Path, data: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ------------------------------------------------------------------ trajectories

TRACE_COLUMNS = ("t", "u0", "ux0", "uxx0")


def save_trajectory(traj: Trajectory, out: str | Path, extra: dict | None = None) -> None:
    """Write ``manifest.json``, ``traces.csv`` and ``snap_%06d.csv`` files."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "traces.csv", TRACE_COLUMNS,
              zip(traj.times, traj.trace_u0, traj.trace_ux0, traj.trace_uxx0))
    for step, snap in zip(traj.snapshot_steps, traj.snapshots):
        write_field(snap, out / f"snap_{int(step):06d}.csv")
    manifest = {"solver": traj.config.describe(),
                "snapshot_steps": [int(s) for s in traj.snapshot_steps]}
    if extra:
        manifest.update(extra)
    write_json(out / "manifest.json", manifest)


class _StoredBoundary:
    """Placeholder for boundary data that cannot be restored from disk."""

    def __init__(self, name: str):
        self.__qualname__ = name

    def __call__(self, t):
        raise RuntimeError(f"boundary function {self.__qualname__!r} was not stored")


def _boundary(name):
    if name is None:
        return None
    return zero_boundary if name == "zero" else _StoredBoundary(name)


def load_trajectory(out: str | Path) -> Trajectory:
    """Rebuild a :class:`Trajectory` from a directory written by :func:`save_trajectory`."""
    out = Path(out)
    man = read_json(out / "manifest.json")
    s = man["solver"]
    gd = s["grid"]
    side = Side.parse(gd["side"])
    extent = gd["x_max"] if side is not Side.LEFT else -gd["x_min"]
    grid = make_grid(side, extent, gd["n_points"])
    cfg = SolverConfig(
        grid=grid, dt=s["dt"], t_end=s["t_end"],
        boundary_f=_boundary(s["boundary_f"]), boundary_f1=_boundary(s["boundary_f1"]),
        scheme_theta=s["scheme_theta"], nonlinear_tol=s["nonlinear_tol"],
        nonlinear_max_iter=s["nonlinear_max_iter"], stride=s["stride"],
        direction=s["direction"],
    )
    tr = read_csv(out / "traces.csv")
    steps = np.array(man["snapshot_steps"], dtype=int)
    snaps = tuple(
        Field(grid, read_field(out / f"snap_{k:06d}.csv", side).values) for k in steps
    )
    return Trajectory(
        tr["t"], snaps, steps, tr["u0"], tr["ux0"], tr["uxx0"], cfg,
        np.zeros(tr["t"].shape[0], dtype=np.int64),
    )


def write_diagnostics(records, path: str | Path) -> None:
    from .diagnostics import CSV_COLUMNS
    write_csv(path, CSV_COLUMNS, (r.row() for r in records))


MODULATION_COLUMNS = ("t", "rho", "rho_dot", "z_l2", "z_h1", "orth_residual")


def write_modulation(states, path: str | Path) -> None:
    write_csv(path, MODULATION_COLUMNS,
              ((s.t, s.rho, s.rho_dot_estimate, s.z_l2, s.z_h1, s.orth_residual) for s in states))


def write_spectrum(pairs, out: str | Path) -> None:
    """``spectrum.csv`` plus ``eigvec_%02d.csv`` in field format."""
    out = Path(out)
    write_csv(out / "spectrum.csv", ("index", "eigenvalue"),
              ((i, lam) for i, (lam, _) in enumerate(pairs)))
    for i, (_, vec) in enumerate(pairs):
        write_field(vec, out / f"eigvec_{i:02d}.csv", label="v")
