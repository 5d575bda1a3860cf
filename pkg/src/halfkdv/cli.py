"""Command-line entry point: ``halfkdv <subcommand> [options]``.

Options may also come from a flat ``key = value`` file given by
``--config``; command-line flags take precedence. The exit status is 0 when
every check performed by the subcommand passes and 1 otherwise.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import column, identity_records, is_nonincreasing, trace_smoothing_bounds
from .experiments import (
    ExperimentConfig, bootstrap_chain, build_initial_datum, run_experiment, run_sweep,
    soliton_functional_drift,
)
from .grid import make_grid, points_for_spacing, write_field
from .modulation import ModulationError, default_newton_tol, dq_norm_sq, track
from .diagnostics import energy, mass
from .soliton import (
    SolitonParams, closed_form_mass_energy, ode_residual, profile, profile_derivative,
)
from .solver import SolverConfig, SolverError, evolve, evolve_left_negative_time
from .spectral import build_operator, coercivity_check, lowest_eigenpairs

log = logging.getLogger("halfkdv")

# option name -> converter
KEYS = {
    "side": str, "c": float, "L": float, "alpha": float, "perturbation": str,
    "extent": float, "n": int, "h": float, "dt": float, "t_end": float,
    "stride": int, "out": str, "seed": int, "bump_center": float, "bump_width": float,
    "backend": str, "trials": int, "c_list": str, "L_list": str, "alpha_list": str,
    "workers": int, "acceptance_multiple": float,
}


def read_config(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in KEYS:
            raise ValueError(f"{path}:{i}: unknown key {k!r}")
        out[k] = KEYS[k](v)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--side", help="right, left or full")
    p.add_argument("--c", type=float, help="soliton speed")
    p.add_argument("--L", type=float, help="initial distance from the boundary")
    p.add_argument("--alpha", type=float, help="perturbation size in H1")
    p.add_argument("--perturbation", choices=["none", "scaled_bump", "scaled_gradient"])
    p.add_argument("--extent", type=float, help="truncation extent")
    p.add_argument("--n", type=int, help="number of grid points")
    p.add_argument("--h", type=float, help="grid spacing when --n is not given")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--t-end", dest="t_end", type=float, help="time horizon")
    p.add_argument("--stride", type=int, help="keep every k-th step as a snapshot")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--bump-center", dest="bump_center", type=float)
    p.add_argument("--bump-width", dest="bump_width", type=float)
    p.add_argument("--backend", choices=["cython", "python"])
    p.add_argument("--acceptance-multiple", dest="acceptance_multiple", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfkdv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("soliton", "write the profile and its derivatives, check the profile ODE"),
        ("simulate", "evolve one initial datum and store the trajectory"),
        ("identities", "mass/energy balance over a stored trajectory"),
        ("modulate", "track the translation parameter over a stored trajectory"),
        ("spectral", "spectrum of the linearized operator and coercivity"),
        ("stability", "full stability experiment"),
        ("sweep", "grid of stability experiments"),
    ]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "spectral":
            p.add_argument("--trials", type=int)
        if name == "sweep":
            p.add_argument("--c-list", dest="c_list")
            p.add_argument("--L-list", dest="L_list")
            p.add_argument("--alpha-list", dest="alpha_list")
            p.add_argument("--workers", type=int)
    return ap


def merged_options(args: argparse.Namespace) -> dict:
    opts = read_config(args.config) if getattr(args, "config", None) else {}
    for k in KEYS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def experiment_config(opts: dict, default_side: str = "right") -> ExperimentConfig:
    kw = {}
    for k in ("c", "L", "alpha", "perturbation", "extent", "h", "dt", "t_end", "stride",
              "out", "seed", "bump_center", "bump_width", "backend", "acceptance_multiple"):
        if k in opts:
            kw[k] = opts[k]
    if "n" in opts:
        kw["n_points"] = opts["n"]
    return ExperimentConfig(side=opts.get("side", default_side), **kw)


def _floats(text: str) -> list:
    return [float(s) for s in text.replace(";", ",").split(",") if s.strip()]


def _out(opts: dict, default: str) -> Path:
    p = Path(opts.get("out", default))
    p.mkdir(parents=True, exist_ok=True)
    return p


def _verdict(checks: dict) -> int:
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all(checks.values()) else 1


# ------------------------------------------------------------------ commands

def cmd_soliton(opts: dict) -> int:
    c = opts.get("c", 1.0)
    side = opts.get("side", "full")
    extent = opts.get("extent", 40.0 / math.sqrt(c))
    n = opts.get("n", points_for_spacing(side, extent, opts.get("h", 0.01)))
    g = make_grid(side, extent, n)
    shift = opts.get("L", 0.0) if side == "right" else (-opts.get("L", 0.0) if side == "left" else 0.0)
    p = SolitonParams(c, shift)
    out = _out(opts, "soliton_out")
    write_field(profile(p, g), out / "profile.csv")
    write_field(profile_derivative(p, g, 1), out / "profile_d1.csv", label="du")
    write_field(profile_derivative(p, g, 2), out / "profile_d2.csv", label="d2u")
    res = ode_residual(p, g)
    checks = {"ode_residual <= 1e-10": res <= 1e-10}
    summary = {"c": c, "ode_residual": res}
    if side == "full":
        gf = make_grid("full", 40.0 / math.sqrt(c), points_for_spacing("full", 40.0 / math.sqrt(c), 0.01))
        q = profile(SolitonParams(c), gf)
        M, E = closed_form_mass_energy(c)
        summary.update(mass=mass(q), energy=energy(q), mass_closed=M, energy_closed=E)
        checks["closed-form mass"] = abs(mass(q) - M) <= 1e-4 * abs(M)
        checks["closed-form energy"] = abs(energy(q) - E) <= 1e-4 * abs(E)
    io.write_json(out / "soliton.json", summary)
    return _verdict(checks)


def cmd_simulate(opts: dict) -> int:
    cfg = experiment_config(opts)
    u0 = build_initial_datum(cfg)
    scfg = SolverConfig(grid=u0.grid, dt=cfg.dt, t_end=cfg.horizon, stride=cfg.stride,
                        direction=1 if cfg.side == "right" else -1, backend=cfg.backend)
    try:
        traj = evolve_left_negative_time(scfg, u0) if cfg.side == "left" else evolve(scfg, u0)
    except SolverError as exc:
        print(f"FAIL solver: {exc}")
        return 1
    out = _out(opts, "simulate_out")
    io.save_trajectory(traj, out, {"experiment": cfg.as_dict()})
    recs = identity_records(traj)
    io.write_diagnostics(recs, out / "diagnostics.csv")
    return _verdict({"solution finite": bool(np.all(np.isfinite(traj.final.values)))})


def _stored(opts: dict):
    if "out" not in opts:
        raise SystemExit("--out must point at a stored trajectory")
    return io.load_trajectory(opts["out"])


def cmd_identities(opts: dict) -> int:
    traj = _stored(opts)
    recs = identity_records(traj)
    io.write_diagnostics(recs, Path(opts["out"]) / "diagnostics.csv")
    mres = float(np.max(np.abs(column(recs, "mass_residual"))))
    eres = float(np.max(np.abs(column(recs, "energy_residual"))))
    r1, r2 = trace_smoothing_bounds(traj)
    print(f"max |mass residual| = {mres:.3e}, max |energy residual| = {eres:.3e}")
    print(f"trace smoothing ratios = {r1:.6g}, {r2:.6g}")
    return _verdict({
        "mass nonincreasing": is_nonincreasing(column(recs, "mass"), 2 * mres),
        "energy nonincreasing": is_nonincreasing(column(recs, "energy"), 2 * eres),
        "trace ratios finite": bool(np.isfinite(r1) and np.isfinite(r2)),
    })


def cmd_modulate(opts: dict) -> int:
    traj = _stored(opts)
    c, L = opts.get("c", 1.0), opts.get("L", 15.0)
    try:
        states = track(traj, c, L)
    except ModulationError as exc:
        print(f"FAIL modulation: {exc}")
        return 1
    io.write_modulation(states, Path(opts["out"]) / "modulation.csv")
    tol = default_newton_tol(c) * math.sqrt(dq_norm_sq(c))
    orth = max(abs(s.orth_residual) for s in states)
    return _verdict({"orthogonality": orth <= tol})


def cmd_spectral(opts: dict) -> int:
    c = opts.get("c", 1.0)
    extent = opts.get("extent", 40.0 / math.sqrt(c))
    n = opts.get("n", points_for_spacing("full", extent, opts.get("h", 0.02)))
    g = make_grid("full", extent, n)
    A = build_operator(c, 0.0, g)
    pairs = lowest_eigenpairs(A, 6)
    out = _out(opts, "spectral_out")
    io.write_spectrum(pairs, out)
    res = coercivity_check(c, g, trials=opts.get("trials", 20), seed=opts.get("seed", 0))
    write_field(res.worst_case, out / "coercivity_worst.csv", label="v")
    io.write_json(out / "coercivity.json", {
        "kappa": res.kappa, "trial_min": res.trial_min,
        "unconstrained_min": res.unconstrained_min, "trials": res.n_trials,
    })
    lams = np.array([lam for lam, _ in pairs])
    # the discrete zero mode sits O(h^2) away from 0 on either side
    zero_band = 0.01 * c
    print("lowest eigenvalues: " + ", ".join(f"{v:.6g}" for v in lams[:4]))
    return _verdict({
        "one negative eigenvalue": int(np.sum(lams < -zero_band)) == 1 and abs(lams[1]) < zero_band,
        "kappa > 0": res.kappa > 0,
        "unconstrained minimum < 0": res.unconstrained_min < 0,
    })


def cmd_stability(opts: dict) -> int:
    cfg = experiment_config(opts)
    if cfg.out is None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "out": "stability_out"})
    res = run_experiment(cfg)
    rep = res.report
    extra = {}
    if res.states:
        lem = soliton_functional_drift(cfg, res.trajectory, res.states)
        chain = bootstrap_chain(cfg, res.trajectory, res.states)
        extra = {
            "soliton_mass_drift": lem.mass_dev, "soliton_energy_drift": lem.energy_dev,
            "K_mass": lem.K_mass, "K_energy": lem.K_energy,
            "K_quadratic": chain.K_quadratic, "K_bootstrap": chain.K_bootstrap,
            "K_negative_projection": chain.K_negative_projection,
            "K_mass_projection": chain.K_mass_projection,
        }
        io.write_json(Path(cfg.out) / "constants.json", extra)
    print(f"sup distance {rep.sup_distance:.6g}, envelope {rep.envelope:.6g}, "
          f"C0 {rep.measured_C0:.6g}, rho drift {rep.rho_drift:.6g}")
    if rep.reason:
        print(f"notes: {rep.reason}")
    return _verdict({"stability report": rep.passed})


def cmd_sweep(opts: dict) -> int:
    base = experiment_config(opts)
    if base.out is None:
        base = ExperimentConfig(**{**base.__dict__, "out": "sweep_out"})
    cl = _floats(opts.get("c_list", str(base.c)))
    Ll = _floats(opts.get("L_list", str(base.L)))
    al = _floats(opts.get("alpha_list", str(base.alpha)))
    res = run_sweep(base, cl, Ll, al, workers=opts.get("workers"))
    for (c, a), L0 in sorted(res.frontier.items()):
        print(f"c={c:g} alpha={a:g}: passes for L >= {L0}")
    for (c, L), s in sorted(res.alpha_slopes.items()):
        print(f"c={c:g} L={L:g}: d sup_distance / d alpha = {s:.6g}")
    return _verdict({"all cells ran": all(not str(r[-1]).startswith("error") for r in res.rows)})


COMMANDS = {
    "soliton": cmd_soliton, "simulate": cmd_simulate, "identities": cmd_identities,
    "modulate": cmd_modulate, "spectral": cmd_spectral, "stability": cmd_stability,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = merged_options(args)
    return COMMANDS[args.command](opts)


if __name__ == "__main__":
    sys.exit(main())
