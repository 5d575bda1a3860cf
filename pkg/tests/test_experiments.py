import math

import numpy as np
import pytest

from halfkdv.experiments import (
    ExperimentConfig, bootstrap_chain, build_initial_datum, distance_to_soliton,
    run_backward_left, run_experiment, run_stability, run_sweep, soliton_functional_drift,
)

FAST = dict(t_end=0.4, extent=40.0, h=0.02, dt=4e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(alpha=-0.1)
    with pytest.raises(ValueError):
        ExperimentConfig(L=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(side="full")
    with pytest.raises(ValueError):
        ExperimentConfig(perturbation="noise")
    cfg = ExperimentConfig(c=4.0)
    assert cfg.horizon == 5.0
    assert cfg.domain_extent == pytest.approx(15 + 20 + 20)


@pytest.mark.parametrize("pert", ["scaled_bump", "scaled_gradient"])
def test_initial_datum_distance(pert):
    cfg = ExperimentConfig(alpha=0.02, perturbation=pert, **FAST)
    u0 = build_initial_datum(cfg)
    assert u0.values[0] == 0.0
    d = distance_to_soliton(u0, 1.0, 15.0)
    assert 0.019 <= d <= 0.021 + 10 * math.exp(-15)


def test_initial_datum_alpha_zero():
    u0 = build_initial_datum(ExperimentConfig(alpha=0.0, **FAST))
    assert distance_to_soliton(u0, 1.0, 15.0) <= 10 * math.exp(-15)


def test_perturbation_must_vanish_at_boundary():
    with pytest.raises(ValueError):
        build_initial_datum(ExperimentConfig(alpha=0.01, bump_center=39.9, bump_width=2.0, **FAST))


def test_left_datum_is_mirror():
    r = build_initial_datum(ExperimentConfig(alpha=0.02, **FAST))
    l = build_initial_datum(ExperimentConfig(side="left", alpha=0.02, **FAST))
    assert np.array_equal(l.values, r.values[::-1])


def test_side_specific_runners():
    with pytest.raises(ValueError):
        run_stability(ExperimentConfig(side="left", **FAST))
    with pytest.raises(ValueError):
        run_backward_left(ExperimentConfig(side="right", **FAST))


def test_report_fields():
    res = run_experiment(ExperimentConfig(alpha=0.02, **FAST))
    rep = res.report
    assert rep.passed and rep.pass_
    assert rep.envelope == pytest.approx(0.02 + math.exp(-15))
    assert rep.measured_C0 == pytest.approx(rep.sup_distance / rep.envelope)
    assert rep.measured_rate_constant == pytest.approx(rep.rho_drift / 0.02)
    assert rep.in_tube
    assert len(res.states) == len(res.trajectory.snapshots)


def test_solver_failure_is_reported():
    res = run_experiment(ExperimentConfig(alpha=0.02, c=1.0, L=15.0, t_end=0.4, extent=40.0,
                                          h=0.2, dt=0.4))
    assert not res.report.passed
    assert res.report.reason


def test_singleton_sweep_equals_single_run(tmp_path):
    base = ExperimentConfig(alpha=0.02, out=str(tmp_path), **FAST)
    sw = run_sweep(base, [1.0], [15.0], [0.02], workers=1)
    rep = run_stability(ExperimentConfig(alpha=0.02, **FAST))
    row = sw.rows[0]
    assert row[3] == rep.sup_distance and row[5] == rep.measured_C0
    assert (tmp_path / "sweep.csv").exists()
    assert (tmp_path / "cell_000" / "report.json").exists()


def test_sweep_records_failures(tmp_path):
    base = ExperimentConfig(out=str(tmp_path), **FAST)
    sw = run_sweep(base, [1.0], [15.0, 60.0], [0.02], workers=2)
    assert len(sw.rows) == 2
    bad = sw.rows[1]
    assert bad[10] is False and bad[11] != "ok"


def test_soliton_functionals_near_boundary():
    cfg = ExperimentConfig(L=4.0, alpha=0.0, t_end=3.0, extent=40.0, h=0.02, dt=4e-3)
    res = run_experiment(cfg)
    lem = soliton_functional_drift(cfg, res.trajectory, res.states)
    assert lem.times[0] == 0.0
    # less of the tail is cut off as the soliton moves away from x = 0
    assert lem.mass_increasing
    assert np.all(np.diff(lem.rho) > 0)
    assert lem.closed_form_gap < 1e-3
    assert lem.bound_ok
    assert lem.mass_q[-1] < 3.0


def test_bootstrap_chain_constants():
    cfg = ExperimentConfig(alpha=0.02, **FAST)
    res = run_experiment(cfg)
    ch = bootstrap_chain(cfg, res.trajectory, res.states)
    assert np.isfinite([ch.K_quadratic, ch.K_bootstrap, ch.K_mass_projection]).all()
    # on x < 0 the extension is -Q, so the projection constant is Q(-a)^2 / (2 e^{-2a}) = 18
    assert ch.K_negative_projection == pytest.approx(18.0, rel=1e-3)
    assert ch.negative_h1_ratio == pytest.approx(1.0, rel=1e-3)
