"""
Tests for the Lippmann-Schwinger solver and far-field synthesis.
"""

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import src.forward as forward
from src.errors import ConfigurationError, ContractViolation, SolverError
from src.config import RunConfig
from src.forward import (
    FarFieldMatrix, PlaneWave, VolumeIntegralSolver, accurate_grid, far_field,
    optical_theorem_defect, reciprocity_defect, solve_total_field, synthesize_matrix,
)
from src.geometry import Disk, Grid, MediumSpec, builtin_medium
from src.oracle import mie_farfield, mie_field
from src.utils import uniform_angles


def _disk(n=4.0):
    return MediumSpec(Disk(radius=1.0), n=n, name="disk")


def _far_field_error(medium, grid, k, theta_d=0.0, tol=1e-9):
    angles = uniform_angles(32)
    exact = mie_farfield(k, medium.n, 1.0, theta_d, angles)
    total = solve_total_field(medium, grid, PlaneWave(k, theta_d), tol=tol)
    return np.abs(far_field(total, medium, angles) - exact).max() / np.abs(exact).max()


def test_zero_contrast_returns_incident_field():
    medium = _disk()
    grid = Grid.square(1.3, 48)
    wave = PlaneWave(1.0, 0.3)
    total = solve_total_field(medium, grid, wave, contrast=np.zeros((48, 48)))
    X, Y = grid.mesh()
    assert_allclose(total.values, wave.evaluate(X, Y), atol=1e-12)
    assert np.abs(far_field(total, medium, uniform_angles(8))).max() < 1e-14


def test_disk_far_field_matches_mie_series():
    assert _far_field_error(_disk(4.0), Grid.square(1.2, 128), 1.0) < 1e-3


def test_disk_far_field_converges_at_second_order():
    """Halving h twice at k=4 cuts the far-field error by at least 4**1.7."""
    medium = _disk(4.0)
    errors = [_far_field_error(medium, Grid.around(medium.geometry, h, min_resolution=32), 4.0)
              for h in (0.04, 0.02, 0.01)]
    assert errors[0] > errors[1] > errors[2]
    assert math.log(errors[0] / errors[2]) / math.log(4.0) >= 1.7


def test_pipeline_grid_accuracy_at_k4():
    medium = _disk(4.0)
    grid = RunConfig().validate().solver_grid(medium, 4.0)
    assert grid.h <= 2.0 * math.pi / (4.0 * 2.0) / 10.0
    assert _far_field_error(medium, grid, 4.0, tol=1e-8) < 5e-3

    total = solve_total_field(medium, grid, PlaneWave(4.0, 0.0), tol=1e-8)
    X, Y = grid.mesh()
    exact = mie_field(4.0, 4.0, 1.0, 0.0)(X, Y)
    assert np.linalg.norm(total.values - exact) / np.linalg.norm(exact) < 5e-3


def test_high_frequency_disk_solve_converges():
    """n=4, k=8: k R sqrt(n) = 16, so the iteration cap scales past its floor."""
    medium = _disk(4.0)
    grid = accurate_grid(medium, 8.0)
    solver = VolumeIntegralSolver(medium, grid, 8.0, tol=1e-7)
    restart, cap = solver.krylov_budget()
    assert cap >= 16 * forward.ITERATIONS_PER_WAVE
    assert restart <= cap
    assert _far_field_error(medium, grid, 8.0, tol=1e-7) < 5e-3


def test_solve_is_linear_in_the_incident_field():
    medium = _disk(4.0)
    grid = Grid.square(1.2, 64)
    solver = VolumeIntegralSolver(medium, grid, 1.0, tol=1e-10)
    X, Y = grid.mesh()
    first, second = PlaneWave(1.0, 0.0).evaluate(X, Y), PlaneWave(1.0, 1.0).evaluate(X, Y)
    combined = solver.solve(2.0 * first - 0.5j * second).values
    expected = 2.0 * solver.solve(first).values - 0.5j * solver.solve(second).values
    assert np.linalg.norm(combined - expected) / np.linalg.norm(expected) < 1e-8


def test_total_field_matches_mie_inside_grid():
    medium = _disk(4.0)
    grid = Grid.square(1.2, 128)
    total = solve_total_field(medium, grid, PlaneWave(1.0, 0.5), tol=1e-9)
    X, Y = grid.mesh()
    exact = mie_field(1.0, 4.0, 1.0, 0.5)(X, Y)
    assert np.linalg.norm(total.values - exact) / np.linalg.norm(exact) < 1e-3


def test_far_field_scalar_and_array_forms():
    medium = _disk(2.0)
    total = solve_total_field(medium, Grid.square(1.2, 48), PlaneWave(0.8, 0.0))
    single = far_field(total, medium, 0.25)
    assert isinstance(single, complex)
    assert_allclose(far_field(total, medium, np.array([0.25]))[0], single)


def test_far_field_rejects_a_different_medium():
    total = solve_total_field(_disk(4.0), Grid.square(1.2, 48), PlaneWave(0.8, 0.0))
    with pytest.raises(ContractViolation):
        far_field(total, _disk(2.0), 0.0)


def test_reciprocity_of_synthesized_matrix():
    """The discrete system is symmetric, so A(x, d) = A(-d, -x) up to solver tolerance."""
    medium = builtin_medium("square", 4.0)
    A = synthesize_matrix(medium, Grid.square(1.4, 48), 1.0, m=16, n_inc=16, tol=1e-9)
    assert reciprocity_defect(A) < 1e-6


def test_reciprocity_uses_shared_angles():
    medium = builtin_medium("square", 4.0)
    A = synthesize_matrix(medium, Grid.square(1.4, 48), 1.0, m=16, n_inc=32, tol=1e-9)
    assert reciprocity_defect(A) < 1e-6
    with pytest.raises(ContractViolation):
        reciprocity_defect(FarFieldMatrix(1.0, np.ones((12, 16))))


def test_optical_theorem_holds_approximately():
    medium = _disk(4.0)
    A = synthesize_matrix(medium, Grid.square(1.2, 128), 1.0, m=32, n_inc=8, tol=1e-9)
    assert optical_theorem_defect(A, column=0) < 1e-2


def test_parallel_synthesis_is_deterministic():
    medium = builtin_medium("square", 4.0)
    grid = Grid.square(1.4, 40)
    serial = synthesize_matrix(medium, grid, 1.0, m=8, n_inc=8, n_jobs=1)
    threaded = synthesize_matrix(medium, grid, 1.0, m=8, n_inc=8, n_jobs=2)
    assert_array_equal(serial.values, threaded.values)
    assert serial.values.shape == (8, 8)


def test_sampling_floor_enforced():
    medium = builtin_medium("square", 4.0)
    with pytest.raises(ConfigurationError):
        synthesize_matrix(medium, Grid.square(1.4, 48), 2.0, m=5, n_inc=16)


def test_coarse_grid_rejected():
    medium = builtin_medium("square", 16.0)
    with pytest.raises(ConfigurationError):
        VolumeIntegralSolver(medium, Grid.square(1.5, 32), k=3.0)


def test_tolerance_range_enforced():
    medium = builtin_medium("square", 4.0)
    with pytest.raises(ConfigurationError):
        VolumeIntegralSolver(medium, Grid.square(1.4, 48), k=1.0, tol=1e-3)


def test_solver_error_carries_residual_history(monkeypatch):
    monkeypatch.setattr(forward, "RESTART", 1)
    monkeypatch.setattr(forward, "MAX_ITERATIONS", 1)
    monkeypatch.setattr(forward, "ITERATIONS_PER_WAVE", 0)
    medium = builtin_medium("square", 16.0)
    solver = VolumeIntegralSolver(medium, Grid.square(1.4, 48), k=1.0, tol=1e-10)
    with pytest.raises(SolverError) as info:
        solver.solve_plane_wave(0.0)
    assert len(info.value.residuals) >= 1
    assert info.value.code == "E_SOLVER"


def test_far_field_constant():
    k = 2.5
    assert_allclose(forward.far_field_constant(k),
                    np.exp(1j * math.pi / 4) / math.sqrt(8 * math.pi * k))
