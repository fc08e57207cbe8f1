import numpy as np
import pytest

from branchscape.energy import SolverConfig, objective
from branchscape.grid import CellField, StaggeredField, divergence
from branchscape.optimizer import initial_field, solve
from branchscape.problem import build_instance
from branchscape.projection import BoxBounds, max_violation


@pytest.fixture(scope="module")
def small_run():
    cfg = SolverConfig(alpha=0.75, M=16, max_iter=200)
    delta, bounds = build_instance(cfg)
    V, report = solve(cfg, None, delta)
    return cfg, delta, bounds, V, report


def test_strict_descent_and_feasibility(small_run):
    cfg, _, bounds, V, report = small_run
    F = np.array(report.energies)
    assert report.initial_energy > F[0]
    assert np.all(np.diff(F) < 0)
    assert max(report.violations) <= 10 * cfg.tol_p
    assert max_violation(V, bounds) <= 10 * cfg.tol_p
    assert V.boundary_max() == 0
    assert report.final_energy == pytest.approx(objective(V, cfg))


def test_report_bookkeeping(small_run):
    _, _, _, _, report = small_run
    n = report.iterations
    assert report.status == "converged"
    assert len(report.energies) == len(report.step_sizes) == len(report.violations) == n
    assert all(report.projection_flags)
    assert report.final_error < 1e-6


def test_restart_from_output_is_a_fixed_point(small_run):
    cfg, delta, _, V, report = small_run
    V2, r2 = solve(cfg, V, delta, u0=report.u)
    assert abs(r2.final_energy - report.final_energy) <= cfg.tol * abs(report.final_energy) * 10


def test_equality_constraint_keeps_divergence_fixed():
    cfg = SolverConfig(alpha=0.7, M=12, max_iter=30)
    g = cfg.geometry
    zero = CellField.zeros(g)
    V, report = solve(cfg, None, bounds=BoxBounds(zero, zero.copy()))
    assert np.abs(divergence(V).values).max() <= 10 * cfg.tol_p
    assert np.all(np.diff(report.energies) < 0)


def test_iteration_cap_and_determinism():
    cfg = SolverConfig(alpha=0.6, M=12, max_iter=5, tol=1e-14)
    delta, _ = build_instance(cfg)
    V1, r1 = solve(cfg, None, delta)
    V2, r2 = solve(cfg, None, delta)
    assert r1.status == "max_iter" and r1.iterations == 5
    assert r1.energies == r2.energies
    np.testing.assert_array_equal(V1.data, V2.data)


def test_zero_iterations():
    cfg = SolverConfig(alpha=0.6, M=8, max_iter=0)
    delta, _ = build_instance(cfg)
    _, report = solve(cfg, None, delta)
    assert report.status == "max_iter" and report.energies == []


def test_armijo_variant_descends():
    cfg = SolverConfig(alpha=0.8, M=12, max_iter=40, armijo=True)
    delta, _ = build_instance(cfg)
    _, report = solve(cfg, None, delta)
    assert np.all(np.diff(report.energies) < 0)


def test_initial_field_is_seeded():
    cfg = SolverConfig(alpha=0.7, M=8, seed=3)
    a, b = initial_field(cfg), initial_field(cfg)
    np.testing.assert_array_equal(a.data, b.data)
    assert np.abs(a.data).max() <= cfg.init_amplitude and a.boundary_max() == 0


def test_input_validation():
    cfg = SolverConfig(alpha=0.7, M=8)
    with pytest.raises(ValueError):
        solve(cfg, None)
    delta, _ = build_instance(cfg)
    with pytest.raises(ValueError):
        solve(cfg, StaggeredField.zeros(SolverConfig(alpha=0.7, M=10).geometry), delta)
