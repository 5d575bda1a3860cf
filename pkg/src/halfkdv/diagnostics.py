"""Mass, energy and their boundary-flux balance laws along a trajectory.

With ``w = u_xx + u^2`` evaluated at x = 0, a smooth solution satisfies

right half-line::

    dM/dt = -1/2 u_x^2 + u (u_xx + 2/3 u^2)
    dE/dt = -1/2 w^2 - u_x u_t

left half-line (x = 0 is the right end)::

    dM/dt = +1/2 u_x^2 - u (u_xx + 2/3 u^2)
    dE/dt = +1/2 w^2 + u_x u_t

The residuals below are these laws integrated in time with the trapezoidal
rule over the solver steps and evaluated at snapshot times. Time integrals
are oriented, so the same formulas cover negative-time runs. The reported
cumulative fluxes ``flux_*_cum`` are integrals over elapsed time and thus
nondecreasing in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.integrate import trapezoid as trapezoid_t  # nonuniform time steps

from .grid import Field, Side, diff_values, norm, trapezoid
from .solver import Trajectory

CSV_COLUMNS = (
    "t", "mass", "energy", "flux_mass_cum", "flux_energy_cum",
    "mass_residual", "energy_residual",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    flux_mass_cum: float
    flux_energy_cum: float
    mass_residual: float
    energy_residual: float

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in CSV_COLUMNS)


def mass(f: Field) -> float:
    """``1/2`` times the integral of ``f^2`` over the field's domain."""
    return 0.5 * trapezoid(f.values ** 2, f.grid.h)


def energy(f: Field) -> float:
    """Integral of ``1/2 f_x^2 - 1/3 f^3``."""
    fx = diff_values(f.values, f.grid.h, 1)
    return trapezoid(0.5 * fx ** 2 - f.values ** 3 / 3.0, f.grid.h)


def _cum(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    return cumulative_trapezoid(y, t, initial=0.0)


def _time_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    if not np.any(y):
        return np.zeros_like(y)
    return np.gradient(y, t, edge_order=2)


def _check(traj: Trajectory) -> None:
    nt = traj.times.shape[0]
    for name in ("trace_u0", "trace_ux0", "trace_uxx0"):
        arr = getattr(traj, name)
        if arr is None or arr.shape[0] != nt:
            raise ValueError(f"trajectory is missing per-step {name}")


def _records(traj: Trajectory) -> list:
    _check(traj)
    t = np.asarray(traj.times, dtype=float)
    u0, ux, uxx = traj.trace_u0, traj.trace_ux0, traj.trace_uxx0
    side = traj.grid.side
    elapsed = np.abs(t - t[0])
    w = uxx + u0 ** 2
    flux_m = 0.5 * _cum(ux ** 2, elapsed)
    flux_e = 0.5 * _cum(w ** 2, elapsed)

    if side is Side.FULL:
        # no boundary: both quantities are conserved
        dm = np.zeros_like(t)
        de = np.zeros_like(t)
        flux_m = np.zeros_like(t)
        flux_e = np.zeros_like(t)
    else:
        ut = _time_derivative(u0, t)
        sign = 1.0 if side is Side.RIGHT else -1.0
        dm = sign * (0.5 * _cum(ux ** 2, t) - _cum(u0 * (uxx + 2.0 * u0 ** 2 / 3.0), t))
        de = sign * (0.5 * _cum(w ** 2, t) + _cum(ux * ut, t))

    snaps = traj.snapshots
    steps = traj.snapshot_steps
    m = np.array([mass(s) for s in snaps])
    e = np.array([energy(s) for s in snaps])
    out = []
    for j, k in enumerate(steps):
        out.append(DiagnosticsRecord(
            float(t[k]), float(m[j]), float(e[j]),
            float(flux_m[k]), float(flux_e[k]),
            float(m[j] - m[0] + dm[k]), float(e[j] - e[0] + de[k]),
        ))
    return out


def mass_identity_residuals(traj: Trajectory) -> list:
    """Records whose ``mass_residual`` is the integrated mass balance.

    On the right half-line this is
    ``M(t) - M(0) + 1/2 int u_x^2 - int u (u_xx + 2/3 u^2)`` at x = 0; left
    half-line trajectories use the mirrored law.
    """
    return _records(traj)


def energy_identity_residuals(traj: Trajectory) -> list:
    """Records whose ``energy_residual`` is the integrated energy balance."""
    return _records(traj)


def left_halfline_identity_residuals(traj: Trajectory) -> list:
    """Balance laws of the left half-line (either time direction)."""
    if traj.grid.side is not Side.LEFT:
        raise ValueError("trajectory is not on a left half-line grid")
    return _records(traj)


def identity_records(traj: Trajectory) -> list:
    """All diagnostics at the snapshot times."""
    return _records(traj)


def column(records, name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in records])


def max_increase(values) -> float:
    """Largest upward jump between consecutive entries (0 if monotone)."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 2:
        return 0.0
    return float(max(np.max(np.diff(v)), 0.0))


def is_nonincreasing(values, slack: float) -> bool:
    return max_increase(values) <= slack


def trace_smoothing_bounds(traj: Trajectory) -> tuple[float, float]:
    """Time-integrated boundary traces over the sup of interior norms.

    Returns ``(int u_x^2 ds / sup ||u||_L2^2, int u_xx^2 ds / sup ||u||_H1^2)``
    with integrals over elapsed time.
    """
    _check(traj)
    elapsed = np.abs(traj.times - traj.times[0])
    i1 = float(trapezoid_t(traj.trace_ux0 ** 2, elapsed))
    i2 = float(trapezoid_t(traj.trace_uxx0 ** 2, elapsed))
    s1 = max(norm(s, "L2") ** 2 for s in traj.snapshots)
    s2 = max(norm(s, "H1") ** 2 for s in traj.snapshots)
    r1 = i1 / s1 if s1 > 0 else 0.0
    r2 = i2 / s2 if s2 > 0 else 0.0
    return r1, r2
