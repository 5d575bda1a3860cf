"""Finite-horizon stability experiments built from the solver, diagnostics and modulation.

A run starts from a half-line soliton moved to distance ``L`` from the
boundary, made to vanish at ``x = 0`` by a localized corrector, plus an
H1-normalized perturbation of size ``alpha``. It then measures how far the
solution stays from the modulated soliton family.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .diagnostics import column, identity_records, is_nonincreasing, mass, energy, max_increase
from .grid import Field, Side, make_grid, norm, points_for_spacing
from .modulation import (
    ModulationError, mass_projection, negative_side_projection,
    split_norms, tilde_z, track,
)
from .soliton import halfline_mass_energy, profile_values, tail_h1_constant
from .solver import SolverConfig, SolverError, evolve, evolve_left_negative_time
from .spectral import build_operator, quadratic_form

PERTURBATIONS = ("none", "scaled_bump", "scaled_gradient")


@dataclass(frozen=True)
class ExperimentConfig:
    """One stability experiment.

    ``extent`` defaults to ``L + c t_end + 40/sqrt(c)`` and ``n_points`` to
    spacing 0.01; ``t_end`` defaults to ``20/c``. ``bump_center`` defaults
    to ``L``.
    """

    side: str = "right"
    c: float = 1.0
    L: float = 15.0
    alpha: float = 0.0
    perturbation: str = "scaled_bump"
    bump_center: Optional[float] = None
    bump_width: float = 1.0
    extent: Optional[float] = None
    n_points: Optional[int] = None
    h: float = 0.01
    dt: float = 2e-3
    t_end: Optional[float] = None
    stride: int = 10
    out: Optional[str] = None
    seed: int = 0
    acceptance_multiple: float = 10.0
    backend: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "side", Side.parse(self.side).value)
        if self.side == Side.FULL.value:
            raise ValueError("stability experiments run on a half-line")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"perturbation must be one of {PERTURBATIONS}")
        if not self.bump_width > 0:
            raise ValueError("bump_width must be positive")

    @property
    def horizon(self) -> float:
        return 20.0 / self.c if self.t_end is None else float(self.t_end)

    @property
    def domain_extent(self) -> float:
        if self.extent is not None:
            return float(self.extent)
        return float(self.L + self.c * self.horizon + 40.0 / math.sqrt(self.c))

    @property
    def points(self) -> int:
        if self.n_points is not None:
            return int(self.n_points)
        return points_for_spacing(self.side, self.domain_extent, self.h)

    def grid(self):
        return make_grid(self.side, self.domain_extent, self.points)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(extent=self.domain_extent, n_points=self.points, t_end=self.horizon)
        return d


# --------------------------------------------------------------- initial data

def corrector(x: np.ndarray) -> np.ndarray:
    return np.exp(-x * x)


def perturbation_shape(cfg: ExperimentConfig, x: np.ndarray) -> np.ndarray:
    """Unnormalized perturbation on the right half-line coordinate ``x >= 0``."""
    if cfg.perturbation == "none":
        return np.zeros_like(x)
    x0 = cfg.L if cfg.bump_center is None else cfg.bump_center
    w = cfg.bump_width
    g = np.exp(-((x - x0) / w) ** 2)
    bump = x * x * g
    if cfg.perturbation == "scaled_bump":
        return bump
    # derivative of the bump; still vanishes at x = 0
    return (2.0 * x - 2.0 * x * x * (x - x0) / (w * w)) * g


def build_initial_datum(cfg: ExperimentConfig) -> Field:
    """``Q_c(x - L) - Q_c(-L) exp(-x^2) + alpha p / ||p||_H1`` (mirrored on the left)."""
    g = cfg.grid()
    # distance from the boundary; the left datum is the node-exact mirror
    xr = make_grid(Side.RIGHT, g.extent, g.n_points).x
    if g.side is Side.LEFT:
        xr = xr[::-1]
    c, L = cfg.c, cfg.L
    base = profile_values(c, xr - L) - float(profile_values(c, -L)) * corrector(xr)
    p = perturbation_shape(cfg, xr)
    if abs(p[0 if g.side is Side.RIGHT else -1]) > 1e-14 or (
        abs(p[-1 if g.side is Side.RIGHT else 0]) > 1e-12
    ):
        raise ValueError("perturbation does not vanish at the boundary")
    pert = np.zeros_like(p)
    if cfg.alpha > 0 and np.any(p):
        pert = cfg.alpha * p / norm(Field(g, p), "H1")
    u = base + pert
    u[0] = u[-1] = 0.0  # boundary value and far-end truncation
    return Field(g, u)


def distance_to_soliton(u: Field, c: float, L: float) -> float:
    """``||u - Q_c(. - L)||_H1`` on the half-line of ``u``."""
    center = L if u.grid.side is Side.RIGHT else -L
    return norm(Field(u.grid, u.values - profile_values(c, u.grid.x - center)), "H1")


# -------------------------------------------------------------------- reports

@dataclass(frozen=True)
class StabilityReport:
    sup_distance: float
    envelope: float
    measured_C0: float
    rho_drift: float
    measured_rate_constant: float
    identity_ceilings: tuple
    passed: bool
    initial_distance: float = float("nan")
    final_distance: float = float("nan")
    first_quarter_max: float = float("nan")
    no_growth: bool = False
    mass_monotone: bool = False
    energy_monotone: bool = False
    in_tube: bool = False
    mass_loss_fraction: float = float("nan")
    reason: str = ""
    failure_time: float = float("nan")

    @property
    def pass_(self) -> bool:
        return self.passed

    def as_dict(self) -> dict:
        d = asdict(self)
        d["identity_ceilings"] = list(self.identity_ceilings)
        return d


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    report: StabilityReport
    trajectory: object = field(repr=False, default=None)
    records: list = field(repr=False, default_factory=list)
    states: list = field(repr=False, default_factory=list)


def _solver_config(cfg: ExperimentConfig, grid) -> SolverConfig:
    return SolverConfig(
        grid=grid, dt=cfg.dt, t_end=cfg.horizon, stride=cfg.stride,
        direction=1 if grid.side is Side.RIGHT else -1, backend=cfg.backend,
    )


def _report(cfg, traj, records, states, failure=None) -> StabilityReport:
    c, L, alpha = cfg.c, cfg.L, cfg.alpha
    envelope = alpha + math.exp(-math.sqrt(c) * L)
    m = column(records, "mass")
    e = column(records, "energy")
    mres = float(np.max(np.abs(column(records, "mass_residual"))))
    eres = float(np.max(np.abs(column(records, "energy_residual"))))
    mass_mono = is_nonincreasing(m, 2.0 * mres)
    energy_mono = is_nonincreasing(e, 2.0 * eres)
    loss = float((m[0] - m[-1]) / m[0]) if m[0] > 0 else 0.0
    if failure is not None or not states:
        reason, ftime = failure if failure is not None else ("no snapshots", float("nan"))
        return StabilityReport(
            float("inf"), envelope, float("inf"), float("inf"), float("inf"),
            (mres, eres), False, mass_monotone=mass_mono, energy_monotone=energy_mono,
            mass_loss_fraction=loss, reason=reason, failure_time=ftime,
        )
    d = np.array([s.z_h1 for s in states])
    rdot = np.array([s.rho_dot_estimate for s in states])
    sup_d = float(np.max(d))
    drift = float(np.max(np.abs(rdot - c))) if rdot.size > 1 else 0.0
    quarter = d[: max(1, len(d) // 4)]
    fq = float(np.max(quarter))
    no_growth = bool(d[-1] <= 2.0 * fq)
    tube = bool(np.all(d <= cfg.acceptance_multiple * (alpha + math.exp(-math.sqrt(c) * L / 2.0))))
    C0 = sup_d / envelope
    rate = drift / alpha if alpha > 0 else float("inf")
    ok = bool(np.isfinite(sup_d) and C0 <= cfg.acceptance_multiple and mass_mono and energy_mono)
    reasons = []
    if not C0 <= cfg.acceptance_multiple:
        reasons.append("envelope")
    if not (mass_mono and energy_mono):
        reasons.append("monotonicity")
    if not no_growth:
        reasons.append("growth")
    return StabilityReport(
        sup_d, envelope, C0, drift, rate, (mres, eres), ok,
        initial_distance=float(d[0]), final_distance=float(d[-1]), first_quarter_max=fq,
        no_growth=no_growth, mass_monotone=mass_mono, energy_monotone=energy_mono,
        in_tube=tube, mass_loss_fraction=loss, reason=";".join(reasons),
    )


def _execute(cfg: ExperimentConfig, left: bool) -> ExperimentResult:
    u0 = build_initial_datum(cfg)
    scfg = _solver_config(cfg, u0.grid)
    try:
        traj = evolve_left_negative_time(scfg, u0) if left else evolve(scfg, u0)
    except SolverError as exc:
        t_fail = exc.step * cfg.dt * (-1.0 if left else 1.0)
        rep = StabilityReport(float("inf"), float("nan"), float("inf"), float("inf"),
                              float("inf"), (float("nan"), float("nan")), False,
                              reason=f"solver: {exc}", failure_time=t_fail)
        return ExperimentResult(cfg, rep)
    records = identity_records(traj)
    states, failure = [], None
    try:
        states = track(traj, cfg.c, cfg.L)
    except ModulationError as exc:
        failure = (f"modulation: {exc}", float(getattr(exc, "t", float("nan"))))
    rep = _report(cfg, traj, records, states, failure)
    res = ExperimentResult(cfg, rep, traj, records, states)
    if cfg.out:
        write_outputs(res, cfg.out)
    return res


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run on the configured side (negative time on the left half-line)."""
    return _execute(cfg, left=Side.parse(cfg.side) is Side.LEFT)


def run_stability(cfg: ExperimentConfig) -> StabilityReport:
    """Right half-line, forward time."""
    if Side.parse(cfg.side) is not Side.RIGHT:
        raise ValueError("run_stability expects the right half-line")
    return _execute(cfg, left=False).report


def run_backward_left(cfg: ExperimentConfig) -> StabilityReport:
    """Left half-line, negative time, against ``Q_c(. - rho + L)``."""
    if Side.parse(cfg.side) is not Side.LEFT:
        raise ValueError("run_backward_left expects the left half-line")
    return _execute(cfg, left=True).report


def write_outputs(res: ExperimentResult, out: str | Path) -> None:
    out = Path(out)
    extra = {"experiment": res.config.as_dict()}
    if res.trajectory is not None:
        io.save_trajectory(res.trajectory, out, extra)
        io.write_diagnostics(res.records, out / "diagnostics.csv")
        io.write_modulation(res.states, out / "modulation.csv")
    io.write_json(out / "report.json", res.report.as_dict())


# --------------------------------------------------------- soliton functionals

@dataclass(frozen=True)
class SolitonFunctionalReport:
    times: np.ndarray
    rho: np.ndarray
    mass_q: np.ndarray
    energy_q: np.ndarray
    mass_dev: float
    energy_dev: float
    K_mass: float
    K_energy: float
    closed_form_gap: float
    mass_increasing: bool
    bound_ok: bool


def soliton_functional_drift(cfg: ExperimentConfig, traj, states) -> SolitonFunctionalReport:
    """Drift of mass and energy of the modulated soliton restricted to the half-line.

    Deviations from ``t = 0`` are compared with
    ``exp(-2 sqrt(c)(L + rho(t))) + exp(-2 sqrt(c)(L + rho(0)))``; the
    measured ratios are reported as ``K_mass`` and ``K_energy``.
    """
    c, L = cfg.c, cfg.L
    g = traj.grid
    sgn = 1.0 if g.side is Side.RIGHT else -1.0
    rho = np.array([s.rho for s in states])
    t = np.array([s.t for s in states])
    # distance of the soliton center from the boundary
    a = L + sgn * rho
    mq, eq, gap = [], [], 0.0
    for ai in a:
        q = Field(g, profile_values(c, np.abs(g.x) - ai))
        mq.append(mass(q))
        eq.append(energy(q))
        mc, ec = halfline_mass_energy(c, ai)
        gap = max(gap, abs(mq[-1] - mc), abs(eq[-1] - ec))
    mq, eq = np.array(mq), np.array(eq)
    scale = np.exp(-2 * math.sqrt(c) * a) + math.exp(-2 * math.sqrt(c) * a[0])
    dm = np.abs(mq - mq[0])
    de = np.abs(eq - eq[0])
    Km = float(np.max(dm / scale))
    Ke = float(np.max(de / scale))
    order = np.argsort(np.abs(t - t[0]))
    inc = max_increase(-mq[order]) <= 1e-13 * max(1.0, abs(mq[0]))
    bound = bool(Km <= 2 * 9.0 * c ** 1.5 and Ke <= 2 * 9.0 * c ** 2.5)
    return SolitonFunctionalReport(t, rho, mq, eq, float(dm.max()), float(de.max()),
                                   Km, Ke, float(gap), bool(inc), bound)


verify_lemma52 = soliton_functional_drift


# --------------------------------------------------------------- bootstrap chain

@dataclass(frozen=True)
class ChainReport:
    times: np.ndarray
    quadratic_form: np.ndarray
    z_h1: np.ndarray
    K_quadratic: float
    K_bootstrap: float
    K_negative_projection: float
    K_mass_projection: float
    K_extension: float
    negative_h1_ratio: float


def bootstrap_chain(cfg: ExperimentConfig, traj, states) -> ChainReport:
    """Constants of the energy-coercivity argument along a tracked run.

    For each snapshot with ``z~`` the zero extension minus the modulated
    soliton:

    * ``K_quadratic = max <L z~, z~> / (alpha^2 + ||z||^3 + e^{-2 sqrt(c) L})``
    * ``K_bootstrap = max ||z||^2 / (alpha^2 + e^{-2 sqrt(c) L} + ||z||^3)``
    * ``K_negative_projection = max |int_{x<0} z~ Q'| / e^{-2 sqrt(c)(rho + L)}``
    * ``K_mass_projection = max |int z Q| / (||z(0)|| + ||z||^2 + e^{-2 sqrt(c) L})``
    * ``K_extension = max ||z~||_H1(R) / (||z|| + e^{-sqrt(c)(rho + L)})``
    * ``negative_h1_ratio = max ||z~||_H1(R-) / (K_tail e^{-sqrt(c)(rho + L)})``
    """
    c, L, alpha = cfg.c, cfg.L, cfg.alpha
    sq = math.sqrt(c)
    floor = math.exp(-2 * sq * L)
    side = traj.grid.side
    sgn = 1.0 if side is Side.RIGHT else -1.0
    qf, zs, kq, kb, kn, km, ke, neg = [], [], [], [], [], [], [], []
    z0 = states[0].z_h1
    for snap, st in zip(traj.snapshots, states):
        a = L + sgn * st.rho
        zt = tilde_z(snap, c, st.rho, L)
        A = build_operator(c, sgn * a, zt.grid)
        q = quadratic_form(A, zt)
        z = st.z_h1
        qf.append(q)
        zs.append(z)
        kq.append(q / (alpha ** 2 + z ** 3 + floor))
        kb.append(z ** 2 / (alpha ** 2 + floor + z ** 3))
        kn.append(abs(negative_side_projection(st, snap, c, L)) / math.exp(-2 * sq * a))
        km.append(abs(mass_projection(st, c, L)) / (z0 + z ** 2 + floor))
        nrm = split_norms(zt)
        ke.append(nrm["total"] / (z + math.exp(-sq * a)))
        outside = nrm["negative"] if side is Side.RIGHT else nrm["positive"]
        neg.append(outside / (tail_h1_constant(c) * math.exp(-sq * a)))
    return ChainReport(
        np.array([s.t for s in states]), np.array(qf), np.array(zs),
        float(max(kq)), float(max(kb)), float(max(kn)), float(max(km)),
        float(max(ke)), float(max(neg)),
    )


# ------------------------------------------------------------------------ sweep

SWEEP_COLUMNS = (
    "c", "L", "alpha", "sup_distance", "envelope", "measured_C0", "rho_drift",
    "measured_rate_constant", "mass_ceiling", "energy_ceiling", "pass", "reason",
)


def _sweep_cell(cfg: ExperimentConfig) -> tuple:
    try:
        rep = run_experiment(cfg).report
    except Exception as exc:  # recorded, never aborts the sweep
        return (cfg.c, cfg.L, cfg.alpha) + (float("nan"),) * 7 + (False, f"error: {exc}")
    return (cfg.c, cfg.L, cfg.alpha, rep.sup_distance, rep.envelope, rep.measured_C0,
            rep.rho_drift, rep.measured_rate_constant, rep.identity_ceilings[0],
            rep.identity_ceilings[1], rep.passed, rep.reason or "ok")


@dataclass(frozen=True)
class SweepResult:
    rows: list
    frontier: dict
    alpha_slopes: dict


def run_sweep(base: ExperimentConfig, c_list, L_list, alpha_list,
              workers: int | None = None) -> SweepResult:
    """Run every ``(c, L, alpha)`` combination; rows come back in input order.

    Cells run in separate processes when ``workers != 1`` and each writes to
    its own subdirectory of ``base.out``.
    """
    cells = []
    for i, (c, L, a) in enumerate((c, L, a) for c in c_list for L in L_list for a in alpha_list):
        out = None if base.out is None else str(Path(base.out) / f"cell_{i:03d}")
        cells.append(replace(base, c=float(c), L=float(L), alpha=float(a), out=out))
    if workers == 1 or len(cells) == 1:
        rows = [_sweep_cell(x) for x in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_cell, cells))
    frontier = {}
    slopes = {}
    for c in c_list:
        for a in alpha_list:
            sub = sorted((r for r in rows if r[0] == c and r[2] == a), key=lambda r: r[1])
            # smallest L beyond which every run passes
            front = None
            for r in reversed(sub):
                if not r[10]:
                    break
                front = r[1]
            frontier[(float(c), float(a))] = front
        for L in L_list:
            sub = [r for r in rows if r[0] == c and r[1] == L and np.isfinite(r[3])]
            if len(sub) >= 2:
                al = np.array([r[2] for r in sub])
                sd = np.array([r[3] for r in sub])
                slopes[(float(c), float(L))] = float(np.polyfit(al, sd, 1)[0])
    if base.out is not None:
        io.write_csv(Path(base.out) / "sweep.csv", SWEEP_COLUMNS, rows)
    return SweepResult(rows, frontier, slopes)
