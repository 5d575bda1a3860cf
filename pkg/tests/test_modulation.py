import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfkdv.grid import Field, make_grid, norm
from halfkdv.modulation import (
    ModulationWarning, OutsideNeighborhoodError, TrackingError, boundary_term, dq_norm_sq,
    expansion_residual, fit_translation, full_grid_for, mass_projection,
    negative_side_projection, orthogonality, q_h1_norm, rho_is_increasing, split_norms,
    tilde_z, track, zero_extend,
)
from halfkdv.soliton import negative_side_h1, profile_values
from halfkdv.solver import SolverConfig, evolve

G = make_grid("right", 50.0, 5001)


def translate(c, a, g=G):
    u = profile_values(c, np.abs(g.x) - a)
    u[0 if g.side.value == "right" else -1] = 0.0
    return Field(g, u)


def test_closed_form_norms():
    assert dq_norm_sq(1.0) == pytest.approx(1.2)
    assert q_h1_norm(1.0) == pytest.approx(math.sqrt(7.2))


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.5, 2.0))
def test_fit_recovers_translate(shift, c):
    L = 20.0
    st_ = fit_translation(translate(c, L + shift), c, L)
    assert abs(st_.rho - shift) <= 1e-6
    assert abs(st_.orth_residual) <= 1e-10


def test_fit_from_poor_guess_uses_fallback():
    st_ = fit_translation(translate(1.0, 20.3), 1.0, 20.0, rho_guess=3.5)
    assert st_.rho == pytest.approx(0.3, abs=1e-6)


def test_fit_left_side():
    gl = make_grid("left", 50.0, 5001)
    st_ = fit_translation(translate(1.0, 20.25, gl), 1.0, 20.0)
    # on the left the translate is Q(x - rho + L) with rho = -0.25
    assert st_.rho == pytest.approx(-0.25, abs=1e-6)
    assert st_.z.grid == gl


def test_orthogonality_zero_at_center():
    u = translate(1.0, 20.0)
    assert abs(orthogonality(u.values, G.x, G.h, 1.0, 20.0)) < 1e-12


def test_outside_neighborhood():
    u = Field(G, 3.0 * translate(1.0, 20.0).values)
    with pytest.raises(OutsideNeighborhoodError):
        fit_translation(u, 1.0, 20.0)


def test_track_soliton_speed():
    g = make_grid("right", 50.0, 2501)
    u0 = translate(1.0, 15.0, g)
    tr = evolve(SolverConfig(g, dt=4e-3, t_end=4.0, stride=50), u0)
    states = track(tr, 1.0, 15.0)
    assert rho_is_increasing(states)
    rdot = np.array([s.rho_dot_estimate for s in states])
    assert np.max(np.abs(rdot - 1.0)) <= 0.02
    assert states[0].rho == pytest.approx(0.0, abs=1e-8)


def test_track_reports_failure_time():
    g = make_grid("right", 30.0, 1501)
    snaps = evolve(SolverConfig(g, dt=0.01, t_end=0.2, stride=10), Field(g, np.zeros(1501)))
    with pytest.raises(TrackingError) as e:
        track(snaps, 1.0, 10.0)
    assert e.value.index == 0


def test_zero_extension():
    u = translate(1.0, 8.0, make_grid("right", 30.0, 3001))
    ext = zero_extend(u)
    k = ext.grid.origin_index
    assert np.all(ext.values[:k] == 0.0)
    assert np.array_equal(ext.values[k:], u.values)
    assert split_norms(ext)["total"] == pytest.approx(norm(u), rel=1e-12)
    with pytest.raises(ValueError):
        zero_extend(Field(u.grid, u.values + 1.0))
    with pytest.raises(ValueError):
        zero_extend(u, make_grid("full", 30.0, 3001))


def test_tilde_z_negative_side_is_minus_soliton():
    c, L = 1.0, 6.0
    u = translate(c, L, make_grid("right", 30.0, 3001))
    zt = tilde_z(u, c, 0.0, L)
    k = zt.grid.origin_index
    assert np.allclose(zt.values[:k], -profile_values(c, zt.grid.x[:k] - L))
    neg = split_norms(zt)["negative"]
    assert neg == pytest.approx(negative_side_h1(c, L), rel=1e-3)


def test_expansion_residual_vanishing_perturbation():
    c, L = 1.0, 10.0
    g = make_grid("right", 40.0, 4001)
    # smooth corrector keeps u(0) = 0 without a one-node spike
    u = Field(g, profile_values(c, g.x - L) - profile_values(c, -L) * np.exp(-g.x ** 2))
    res = expansion_residual(u, c, 0.0, L)
    assert res < 1e-9
    assert boundary_term(c, L) > 0  # Q rises on the far left


def test_expansion_residual_with_bump():
    c, L = 1.0, 10.0
    g = make_grid("right", 40.0, 4001)
    z = g.x ** 2 * np.exp(-(g.x - 9.0) ** 2)
    z = 0.1 * z / norm(Field(g, z))
    u = Field(g, translate(c, L, g).values + z)
    assert expansion_residual(u, c, 0.0, L) < 1e-6


def test_projections_finite():
    c, L = 1.0, 12.0
    g = make_grid("right", 40.0, 4001)
    u = translate(c, L, g)
    st_ = fit_translation(u, c, L)
    kn = negative_side_projection(st_, u, c, L)
    # z~ = -Q on x < 0, so the projection is -int_{-inf}^0 Q Q' = -Q(-L)^2 / 2
    assert kn == pytest.approx(-0.5 * profile_values(c, -L) ** 2, rel=1e-3)
    assert abs(mass_projection(st_, c, L)) < 1e-10


def test_decreasing_rho_warns():
    class Fake:
        pass
    g = make_grid("right", 50.0, 5001)
    u1, u2 = translate(1.0, 15.0, g), translate(1.0, 14.5, g)
    f = Fake()
    f.snapshot_times = np.array([0.0, 1.0])
    f.snapshots = (u1, u2)
    with pytest.warns(ModulationWarning):
        track(f, 1.0, 15.0)


def test_full_grid_for():
    fg = full_grid_for(make_grid("left", 10.0, 101))
    assert fg.n_points == 201 and fg.x_min == -10.0
