"""Compare the compiled and pure-Python kernels.

Times the implicit step (``picard_step``), the right-hand side
(``apply_f``) and the banded back-substitution (``band_solve``) on a soliton
datum, then a short full solver run, for each available backend.

    python3 benchmarks/bench_kernels.py --n 8001 --repeat 200
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from halfkdv import kernels
from halfkdv.grid import Field, make_grid
from halfkdv.soliton import SolitonParams, profile
from halfkdv.solver import SolverConfig, evolve, factor_system


def bench_backend(name: str, n: int, repeat: int, dt: float) -> dict:
    k = kernels.get_backend(name)
    g = make_grid("right", 80.0, n)
    u = profile(SolitonParams(1.0, 30.0), g).values.copy()
    u[0] = 0.0
    h = g.h
    lu, piv = factor_system(n, h, 0.5, dt)
    ab, p = k.prepare_factor(lu, piv, 2, 3)
    rhs = np.random.default_rng(0).standard_normal(n)

    def step():
        k.picard_step(ab, p, 2, 3, u, h, dt, 0.5, 0.0, 0.0, 0.0, 0.0, 1e-12, 25)

    out = {
        "picard_step": min(timeit.repeat(step, number=1, repeat=repeat)),
        "apply_f": min(timeit.repeat(lambda: k.apply_f(u, h, 0.0), number=1, repeat=repeat)),
        "band_solve": min(timeit.repeat(lambda: k.band_solve(ab, p, 2, 3, rhs),
                                        number=1, repeat=repeat)),
    }
    cfg = SolverConfig(grid=g, dt=dt, t_end=100 * dt, stride=100, backend=name)
    f0 = Field(g, u)
    out["evolve_100_steps"] = min(timeit.repeat(lambda: evolve(cfg, f0), number=1, repeat=3))
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8001)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--dt", type=float, default=2e-3)
    args = ap.parse_args(argv)

    names = ["python"]
    try:
        kernels.get_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        print("compiled extension not built; timing the pure-Python backend only")
    results = {name: bench_backend(name, args.n, args.repeat, args.dt) for name in names}

    keys = list(next(iter(results.values())))
    print(f"n = {args.n}, best of {args.repeat} (solver run: best of 3)")
    print(f"{'kernel':<18}" + "".join(f"{nm:>14}" for nm in names)
          + ("     speedup" if len(names) == 2 else ""))
    for key in keys:
        row = f"{key:<18}" + "".join(f"{results[nm][key] * 1e6:>12.1f}us" for nm in names)
        if len(names) == 2:
            row += f"{results['python'][key] / results['cython'][key]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
