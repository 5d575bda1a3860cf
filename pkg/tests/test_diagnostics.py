import math

import numpy as np
import pytest

from halfkdv.diagnostics import (
    CSV_COLUMNS, column, energy, energy_identity_residuals, identity_records,
    is_nonincreasing, left_halfline_identity_residuals, mass, mass_identity_residuals,
    max_increase, trace_smoothing_bounds,
)
from halfkdv.grid import Field, make_grid
from halfkdv.soliton import SolitonParams, closed_form_mass_energy, profile, profile_values
from halfkdv.solver import SolverConfig, evolve


def smooth_datum(x, center):
    """Soliton minus a Gaussian corrector so that the corner value is 0."""
    r = np.abs(x)
    u = profile_values(1.0, r - center) - profile_values(1.0, -center) * np.exp(-r * r)
    u[0] = u[-1] = 0.0
    return u


def right_run(center, extent=30.0, h=0.02, dt=4e-3, t_end=2.0, stride=25, f=None):
    n = int(round(extent / h)) + 1
    g = make_grid("right", extent, n)
    u = smooth_datum(g.x, center)
    kw = {} if f is None else {"boundary_f": f}
    if f is not None:
        u[0] = f(0.0)
    return evolve(SolverConfig(g, dt=dt, t_end=t_end, stride=stride, **kw), Field(g, u))


def test_mass_energy_of_soliton():
    g = make_grid("full", 40.0, 8001)
    q = profile(SolitonParams(1.0), g)
    M, E = closed_form_mass_energy(1.0)
    assert mass(q) == pytest.approx(M, rel=1e-6)
    assert energy(q) == pytest.approx(E, rel=1e-4)


def test_records_shape_and_start():
    tr = right_run(10.0, t_end=0.5)
    recs = identity_records(tr)
    assert len(recs) == len(tr.snapshots)
    assert len(recs[0].row()) == len(CSV_COLUMNS)
    assert recs[0].mass_residual == 0.0 and recs[0].energy_residual == 0.0
    assert column(recs, "t")[-1] == pytest.approx(0.5)
    assert mass_identity_residuals(tr) == energy_identity_residuals(tr)


def test_identities_near_boundary_collision():
    # soliton sitting on the corner: large fluxes, small residuals
    tr = right_run(2.0, h=0.01, dt=2e-3, t_end=2.0)
    recs = identity_records(tr)
    m = column(recs, "mass")
    flux = column(recs, "flux_mass_cum")
    assert m[0] - m[-1] > 1e-2
    assert np.all(np.diff(flux) >= 0)
    mres = np.max(np.abs(column(recs, "mass_residual")))
    assert mres <= 1e-2 * (m[0] - m[-1])
    assert is_nonincreasing(m, 2 * mres)


def test_residuals_shrink_with_refinement():
    # soliton at the corner: O(1) fluxes, residual dominated by truncation error
    res = []
    for h, dt in ((0.04, 8e-3), (0.02, 4e-3), (0.01, 2e-3)):
        tr = right_run(2.0, extent=25.0, h=h, dt=dt, t_end=1.0, stride=int(round(0.1 / dt)))
        recs = identity_records(tr)
        res.append([np.max(np.abs(column(recs, k))) for k in ("mass_residual", "energy_residual")])
    res = np.array(res)
    factors = res[:-1] / res[1:]
    assert np.all((factors >= 3.0) & (factors <= 5.0)), factors


def test_nonzero_boundary_data_balance():
    f = lambda t: 0.05 * math.sin(2 * t) ** 2
    tr = right_run(12.0, h=0.02, dt=4e-3, t_end=1.0, f=f)
    recs = identity_records(tr)
    assert np.max(np.abs(column(recs, "mass_residual"))) < 1e-4


def test_left_identities_require_left_side():
    tr = right_run(10.0, t_end=0.2)
    with pytest.raises(ValueError):
        left_halfline_identity_residuals(tr)


def test_left_negative_time_identities():
    g = make_grid("left", 25.0, 1251)
    u = smooth_datum(g.x, 2.0)
    tr = evolve(SolverConfig(g, dt=4e-3, t_end=1.0, stride=25, direction=-1), Field(g, u))
    recs = left_halfline_identity_residuals(tr)
    m = column(recs, "mass")
    assert m[0] - m[-1] > 1e-3  # mass leaves through x = 0 backward in time too
    assert np.max(np.abs(column(recs, "mass_residual"))) < 1e-4
    assert np.max(np.abs(column(recs, "energy_residual"))) < 1e-3


def test_monotonicity_helpers():
    assert max_increase([3, 2, 2, 1]) == 0.0
    assert max_increase([3, 2, 2.5]) == pytest.approx(0.5)
    assert is_nonincreasing([1, 1 + 1e-12], 1e-11)
    assert max_increase([1.0]) == 0.0


def test_trace_smoothing():
    tr = right_run(3.0, h=0.02, dt=4e-3, t_end=1.0)
    r1, r2 = trace_smoothing_bounds(tr)
    assert 0 < r1 < np.inf and 0 < r2 < np.inf
    g = make_grid("right", 10.0, 501)
    z = evolve(SolverConfig(g, dt=0.01, t_end=0.1), Field(g, np.zeros(501)))
    assert trace_smoothing_bounds(z) == (0.0, 0.0)
