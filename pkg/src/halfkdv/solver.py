"""Time stepping for KdV ``u_t + (u_xx + u^2)_x = 0`` on truncated grids.

The discretization is a theta-method in time. The dispersive term uses a
five-point third difference and is treated implicitly through one banded
LU factorization per run; the flux ``(u^2)_x`` is a central difference
resolved inside each step by fixed-point iteration. Rows of the system:

* node 0 and node n-1: the boundary values (identity rows, clamped);
* node 1: a shifted third difference that reaches nodes 0..4;
* node n-2: central stencil with ghost ``u_n = u_{n-2} + 2 h g``, where
  ``g`` is the prescribed slope at the last node (0 for the decay closure).

On the right half-line and the full line, node 0 takes ``f(t)`` (or 0) and
the far end gets ``u = u_x = 0``. On the left half-line forward in time,
x = 0 is the last node and takes the two conditions ``u = f``, ``u_x = f1``;
the far end gets ``u = 0``. Negative time on the left half-line is handled
by reflecting to a right half-line problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg.lapack import dgbtrf
from scipy.special import comb

from . import kernels
from .grid import Field, Grid, Side, boundary_value, diff_values, make_grid

KL, KU = 2, 3


class SolverError(RuntimeError):
    """Base class for aborted integrations; carries the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class NonlinearConvergenceError(SolverError):
    pass


class SolverDivergenceError(SolverError):
    pass


class TruncationWarning(UserWarning):
    """The solution has reached the artificial end of the grid."""


class ResolutionWarning(UserWarning):
    """Repeated differencing has exhausted the floating-point budget."""


def zero_boundary(t: float) -> float:
    return 0.0


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and boundary data for one run.

    ``direction`` is +1 for forward time. -1 is only meaningful on the left
    half-line, where :func:`evolve` dispatches to
    :func:`evolve_left_negative_time`.
    """

    grid: Grid
    dt: float
    t_end: float
    boundary_f: Callable[[float], float] = zero_boundary
    boundary_f1: Optional[Callable[[float], float]] = None
    scheme_theta: float = 0.5
    nonlinear_tol: float = 1e-12
    nonlinear_max_iter: int = 25
    stride: int = 10
    direction: int = 1
    backend: Optional[str] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0.0 <= self.scheme_theta <= 1.0:
            raise ValueError("scheme_theta must lie in [0, 1]")
        if not self.nonlinear_tol > 0:
            raise ValueError("nonlinear_tol must be positive")
        if self.nonlinear_max_iter < 1 or self.stride < 1:
            raise ValueError("nonlinear_max_iter and stride must be >= 1")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        side = self.grid.side
        if self.direction == -1 and side is not Side.LEFT:
            raise ValueError("negative time is only supported on the left half-line")
        if side is Side.LEFT and self.direction == 1:
            if self.boundary_f1 is None:
                raise ValueError(
                    "the left half-line forward in time needs a second boundary "
                    "condition (boundary_f1)"
                )
        elif self.boundary_f1 is not None:
            raise ValueError("this problem takes a single boundary condition at x = 0")
        self.n_steps  # validates the horizon

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError("t_end must be an integer multiple of dt")
        return n

    def describe(self) -> dict:
        return {
            "grid": self.grid.describe(),
            "dt": self.dt,
            "t_end": self.t_end,
            "boundary_f": _callable_name(self.boundary_f),
            "boundary_f1": _callable_name(self.boundary_f1),
            "scheme_theta": self.scheme_theta,
            "nonlinear_tol": self.nonlinear_tol,
            "nonlinear_max_iter": self.nonlinear_max_iter,
            "stride": self.stride,
            "direction": self.direction,
            "n_steps": self.n_steps,
        }


def _callable_name(fn) -> Optional[str]:
    if fn is None:
        return None
    if fn is zero_boundary:
        return "zero"
    return getattr(fn, "__qualname__", repr(fn))


@dataclass(frozen=True)
class Trajectory:
    """Output of a run.

    ``times`` holds every step time in physical time (decreasing for
    negative-time runs); traces have one entry per step. Snapshots are kept
    every ``stride`` steps plus the final step, their step indices are
    ``snapshot_steps``.
    """

    times: np.ndarray
    snapshots: tuple
    snapshot_steps: np.ndarray
    trace_u0: np.ndarray
    trace_ux0: np.ndarray
    trace_uxx0: np.ndarray
    config: SolverConfig
    iterations: np.ndarray = field(repr=False)

    @property
    def grid(self) -> Grid:
        return self.config.grid

    @property
    def snapshot_times(self) -> np.ndarray:
        return self.times[self.snapshot_steps]

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


# --------------------------------------------------------------- compatibility

def compatibility_sequence(u0: Field, m_max: int, nonlinear_factor: float = 2.0) -> list:
    """Time derivatives ``phi_m = d^m u / dt^m`` at ``t = 0`` from the equation.

    ``phi_m = -phi_{m-1}''' - k sum_l C(m-1, l) phi_l phi'_{m-1-l}``. The
    default ``k = 2`` is the coefficient of the flux ``(u^2)_x = 2 u u_x``.
    ``k = 1`` gives the formula written for ``u_t + u_xxx + u u_x = 0``.
    Boundary values ``phi_m(0)`` are the values ``f^{(m)}(0)`` that
    compatible boundary data must take.
    """
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    g = u0.grid
    h = g.h
    budget = np.finfo(float).eps * h ** (-3 * m_max)
    if m_max > 0 and budget > 1e-6:
        warnings.warn(
            f"{3 * m_max} difference applications at h={h:g} amplify roundoff "
            f"by {budget:.1e}", ResolutionWarning, stacklevel=2,
        )
    phis = [u0.values.copy()]
    dphis = [diff_values(phis[0], h, 1)]
    for m in range(1, m_max + 1):
        nxt = -diff_values(phis[m - 1], h, 3)
        for l in range(m):
            nxt -= nonlinear_factor * comb(m - 1, l, exact=True) * phis[l] * dphis[m - 1 - l]
        phis.append(nxt)
        dphis.append(diff_values(nxt, h, 1))
    return [Field(g, p) for p in phis]


# ---------------------------------------------------------------------- stepping

def _band_matrix(n: int, h: float, a: float) -> np.ndarray:
    """Band storage (LAPACK ``dgbtrf`` layout) of ``I + a D3`` with boundary rows."""
    ab = np.zeros((2 * KL + KU + 1, n))
    d = KL + KU
    s = a / (2.0 * h ** 3)

    def put(i, j, v):
        ab[d + i - j, j] += v

    put(0, 0, 1.0)
    put(n - 1, n - 1, 1.0)
    for j, cf in enumerate((-3.0, 10.0, -12.0, 6.0, -1.0)):
        put(1, j, s * cf)
    put(1, 1, 1.0)
    i = np.arange(2, n - 2)
    for off, cf in ((-2, -1.0), (-1, 2.0), (1, -2.0), (2, 1.0)):
        ab[d - off, i + off] += s * cf
    ab[d, i] += 1.0
    for off, cf in ((-2, -1.0), (-1, 2.0), (0, 1.0), (1, -2.0)):
        put(n - 2, n - 2 + off, s * cf)
    put(n - 2, n - 2, 1.0)
    return ab


def factor_system(n: int, h: float, theta: float, dt: float):
    ab = _band_matrix(n, h, theta * dt)
    lu, piv, info = dgbtrf(ab, KL, KU)
    if info != 0:
        raise np.linalg.LinAlgError(f"banded factorization failed (info={info})")
    return lu, piv


def _boundary_data(cfg: SolverConfig, t: float):
    """(left value, right value, prescribed slope at the last node)."""
    side = cfg.grid.side
    if side is Side.RIGHT:
        return float(cfg.boundary_f(t)), 0.0, 0.0
    if side is Side.LEFT:
        return 0.0, float(cfg.boundary_f(t)), float(cfg.boundary_f1(t))
    return 0.0, 0.0, 0.0


def _traces(u: np.ndarray, g: Grid):
    h = g.h
    if g.side is Side.RIGHT:
        return (u[0], boundary_value(u, h, 1, False), boundary_value(u, h, 2, False))
    if g.side is Side.LEFT:
        return (u[-1], boundary_value(u, h, 1, True), boundary_value(u, h, 2, True))
    k = g.origin_index
    return (u[k], (u[k + 1] - u[k - 1]) / (2 * h), (u[k + 1] - 2 * u[k] + u[k - 1]) / (h * h))


def _watch_indices(g: Grid) -> list:
    x = g.x
    if g.side is Side.RIGHT:
        targets = [0.9 * g.x_max]
    elif g.side is Side.LEFT:
        targets = [0.9 * g.x_min]
    else:
        targets = [0.9 * g.x_min, 0.9 * g.x_max]
    return [int(np.argmin(np.abs(x - t))) for t in targets]


def evolve(config: SolverConfig, u0: Field, t0: float = 0.0) -> Trajectory:
    """Integrate from ``u0`` at ``t0`` to ``t0 + t_end``.

    Raises
    ------
    NonlinearConvergenceError
        Fixed-point iteration stalls above ``nonlinear_tol``.
    SolverDivergenceError
        A non-finite value appears.
    """
    if config.direction == -1:
        return evolve_left_negative_time(config, u0)
    g = config.grid
    if u0.grid != g:
        raise ValueError("initial field is not on the configured grid")
    imp = kernels.get_backend(config.backend)
    n, h, dt, theta = g.n_points, g.h, config.dt, config.scheme_theta
    n_steps = config.n_steps
    lu, piv = imp.prepare_factor(*factor_system(n, h, theta, dt), KL, KU)

    left, right, slope = _boundary_data(config, t0)
    u = np.array(u0.values, dtype=float)
    u[0], u[-1] = left, right
    if np.max(np.abs(u - u0.values)) > 1e-10 * max(1.0, np.max(np.abs(u0.values))):
        raise ValueError("initial field does not match the boundary data")

    times = t0 + dt * np.arange(n_steps + 1)
    tu = np.empty(n_steps + 1)
    tux = np.empty(n_steps + 1)
    tuxx = np.empty(n_steps + 1)
    iters = np.zeros(n_steps + 1, dtype=np.int64)
    tu[0], tux[0], tuxx[0] = _traces(u, g)
    snaps = [Field(g, u)]
    steps = [0]
    watch = _watch_indices(g)
    warned = False
    ghost_old = slope / (h * h)

    for k in range(1, n_steps + 1):
        left, right, slope = _boundary_data(config, times[k])
        ghost_new = slope / (h * h)
        v, it, upd = imp.picard_step(
            lu, piv, KL, KU, u, h, dt, theta, left, right,
            ghost_old, ghost_new, config.nonlinear_tol, config.nonlinear_max_iter,
        )
        if not np.all(np.isfinite(v)):
            raise SolverDivergenceError("non-finite values in the solution", k)
        if upd > config.nonlinear_tol:
            raise NonlinearConvergenceError(
                f"fixed-point update {upd:.3e} above tolerance after {it} iterations", k
            )
        u = v
        ghost_old = ghost_new
        iters[k] = it
        tu[k], tux[k], tuxx[k] = _traces(u, g)
        if k % config.stride == 0 or k == n_steps:
            snaps.append(Field(g, u))
            steps.append(k)
            if not warned:
                peak = np.max(np.abs(u))
                if peak > 0 and max(abs(u[i]) for i in watch) > 1e-8 * peak:
                    warnings.warn(
                        f"solution reached 90% of the truncation extent at t={times[k]:g}",
                        TruncationWarning, stacklevel=2,
                    )
                    warned = True

    for arr in (times, tu, tux, tuxx, iters):
        arr.setflags(write=False)
    return Trajectory(times, tuple(snaps), np.array(steps), tu, tux, tuxx, config, iters)


def _reflect(f: Field, g: Grid) -> Field:
    return Field(g, f.values[::-1])


def evolve_left_negative_time(config: SolverConfig, u0: Field) -> Trajectory:
    """Left half-line in negative time via ``u(x, t) = v(-x, -t)``.

    ``v`` solves the right half-line problem forward in time with boundary
    value ``f(-t)``. The returned times run from 0 down to ``-t_end``.
    """
    g = config.grid
    if g.side is not Side.LEFT:
        raise ValueError("negative-time evolution needs a left half-line grid")
    if config.boundary_f1 is not None:
        raise ValueError("the negative-time left problem takes a single boundary condition")
    if u0.grid != g:
        raise ValueError("initial field is not on the configured grid")
    rg = make_grid(Side.RIGHT, g.extent, g.n_points)
    f = config.boundary_f
    rf = zero_boundary if f is zero_boundary else (lambda t: f(-t))
    rcfg = replace(config, grid=rg, boundary_f=rf, direction=1)
    tr = evolve(rcfg, _reflect(u0, rg))
    times = -tr.times
    ux = -tr.trace_ux0
    for arr in (times, ux):
        arr.setflags(write=False)
    return Trajectory(
        times,
        tuple(_reflect(s, g) for s in tr.snapshots),
        tr.snapshot_steps,
        tr.trace_u0,
        ux,
        tr.trace_uxx0,
        config,
        tr.iterations,
    )


def reflect_trajectory(tr: Trajectory, target: SolverConfig) -> Trajectory:
    """Node-by-node image of ``tr`` under ``x -> -x``, ``t -> -t``."""
    g = target.grid
    return Trajectory(
        -tr.times, tuple(_reflect(s, g) for s in tr.snapshots), tr.snapshot_steps,
        tr.trace_u0, -tr.trace_ux0, tr.trace_uxx0, target, tr.iterations,
    )

