import math
import os
import subprocess
import sys

import numpy as np
import pytest

from halfkdv import kernels
from halfkdv.grid import Field, make_grid, norm
from halfkdv.soliton import SolitonParams, profile, profile_values
from halfkdv.solver import (
    ResolutionWarning, SolverConfig, compatibility_sequence, evolve, evolve_left_negative_time,
    factor_system, reflect_trajectory,
)


def soliton_datum(side, extent, n, center, c=1.0):
    g = make_grid(side, extent, n)
    u = profile_values(c, g.x - center).copy()
    u[0] = u[-1] = 0.0
    return Field(g, u)


def test_config_validation():
    g = make_grid("right", 10.0, 101)
    with pytest.raises(ValueError):
        SolverConfig(g, dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        SolverConfig(g, dt=0.3, t_end=1.0)
    with pytest.raises(ValueError):
        SolverConfig(g, dt=0.1, t_end=1.0, direction=-1)
    with pytest.raises(ValueError):
        SolverConfig(g, dt=0.1, t_end=1.0, boundary_f1=lambda t: 0.0)
    gl = make_grid("left", 10.0, 101)
    with pytest.raises(ValueError, match="second boundary"):
        SolverConfig(gl, dt=0.1, t_end=1.0)
    assert SolverConfig(gl, dt=0.1, t_end=1.0, direction=-1).n_steps == 10


def test_initial_datum_must_match_boundary():
    g = make_grid("right", 10.0, 101)
    with pytest.raises(ValueError):
        evolve(SolverConfig(g, dt=0.1, t_end=0.2), Field(g, np.ones(101)))


def test_zero_datum_stays_zero():
    g = make_grid("right", 10.0, 201)
    tr = evolve(SolverConfig(g, dt=0.01, t_end=0.5), Field(g, np.zeros(201)))
    assert np.all(tr.final.values == 0.0)


def test_snapshots_and_traces():
    u0 = soliton_datum("right", 40.0, 2001, 15.0)
    tr = evolve(SolverConfig(u0.grid, dt=0.01, t_end=0.25, stride=10), u0)
    assert list(tr.snapshot_steps) == [0, 10, 20, 25]
    assert tr.times.shape == (26,)
    assert np.all(tr.trace_u0 == 0.0)
    assert tr.times[-1] == pytest.approx(0.25)


def test_boundary_value_imposed_exactly():
    g = make_grid("right", 30.0, 1501)
    f = lambda t: 1e-3 * math.sin(t)
    u0 = soliton_datum("right", 30.0, 1501, 12.0)
    tr = evolve(SolverConfig(g, dt=0.01, t_end=0.5, boundary_f=f), u0)
    assert np.allclose(tr.trace_u0, [f(t) for t in tr.times], atol=1e-15)


def test_left_forward_two_conditions():
    g = make_grid("left", 30.0, 1501)
    u0 = soliton_datum("left", 30.0, 1501, -20.0)
    cfg = SolverConfig(g, dt=0.01, t_end=0.5, boundary_f=lambda t: 0.0,
                       boundary_f1=lambda t: 0.0)
    tr = evolve(cfg, u0)
    assert np.all(np.isfinite(tr.final.values))
    assert abs(tr.final.values[-1]) == 0.0


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_backends_agree():
    u0 = soliton_datum("right", 40.0, 2001, 12.0)
    a = evolve(SolverConfig(u0.grid, dt=2e-3, t_end=0.5, backend="cython"), u0)
    b = evolve(SolverConfig(u0.grid, dt=2e-3, t_end=0.5, backend="python"), u0)
    assert np.max(np.abs(a.final.values - b.final.values)) <= 1e-12


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_backend_kernels_agree():
    n, h, dt = 501, 0.05, 0.01
    lu, piv = factor_system(n, h, 0.5, dt)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(n) * 0.1
    cy, py = kernels.get_backend("cython"), kernels.get_backend("python")
    assert np.allclose(cy.apply_f(u, h, 0.3), py.apply_f(u, h, 0.3), rtol=1e-13, atol=1e-10)
    b1, b2 = u.copy(), u.copy()
    cy.band_solve(*cy.prepare_factor(lu, piv, 2, 3), 2, 3, b1)
    py.band_solve(*py.prepare_factor(lu, piv, 2, 3), 2, 3, b2)
    assert np.allclose(b1, b2, rtol=1e-12, atol=1e-14)


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, HALFKDV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from halfkdv import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_full_line_soliton_travels():
    u0 = soliton_datum("full", 30.0, 3001, -5.0)
    tr = evolve(SolverConfig(u0.grid, dt=2e-3, t_end=2.0, stride=1000), u0)
    exact = profile(SolitonParams(1.0, -3.0), u0.grid)
    assert norm(tr.final - exact) <= 1e-3


def test_left_negative_time_is_reflection():
    ur = soliton_datum("right", 40.0, 2001, 15.0)
    ul = Field(make_grid("left", 40.0, 2001), ur.values[::-1])
    rc = SolverConfig(ur.grid, dt=2e-3, t_end=0.4)
    lc = SolverConfig(ul.grid, dt=2e-3, t_end=0.4, direction=-1)
    tr = evolve(rc, ur)
    tl = evolve_left_negative_time(lc, ul)
    assert tl.times[-1] == pytest.approx(-0.4)
    assert np.array_equal(tl.final.values, tr.final.values[::-1])
    mirrored = reflect_trajectory(tr, lc)
    assert np.array_equal(mirrored.trace_ux0, tl.trace_ux0)
    # evolve dispatches on direction
    assert np.array_equal(evolve(lc, ul).final.values, tl.final.values)


def test_compatibility_sequence_matches_time_derivative():
    g = make_grid("full", 30.0, 3001)
    u0 = profile(SolitonParams(1.0), g)
    phis = compatibility_sequence(u0, 1)
    # traveling wave Q(x - t): u_t = -Q'
    ut = -profile_values(1.0, g.x, 1)
    assert np.max(np.abs(phis[1].values[5:-5] - ut[5:-5])) < 1e-3


def test_compatibility_half_factor_variant():
    g = make_grid("full", 20.0, 2001)
    u0 = Field(g, np.exp(-g.x ** 2))
    a = compatibility_sequence(u0, 1, nonlinear_factor=2.0)[1].values
    b = compatibility_sequence(u0, 1, nonlinear_factor=1.0)[1].values
    u = u0.values
    ux = -2 * g.x * u
    assert np.allclose(a - b, -u * ux, atol=1e-3)


def test_compatibility_resolution_warning():
    g = make_grid("full", 10.0, 4001)
    with pytest.warns(ResolutionWarning):
        compatibility_sequence(Field(g, np.exp(-g.x ** 2)), 3)
    with pytest.raises(ValueError):
        compatibility_sequence(Field(g, np.exp(-g.x ** 2)), -1)
