"""Dirichlet problem, Leray projection and pressure."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary.calculus import divergence, inner_product, scalar_inner
from freeboundary.elliptic import (harmonic_extension, laplacian, leray_project, metric_gradient,
                                   normal_derivative, pressure_solve, project, solve_dirichlet)
from freeboundary.errors import SolveFailure
from freeboundary.grid import DiskGrid
from freeboundary.metric import MetricData, Trajectory, rotation_path, strain_path
from freeboundary.suites import generator, quadratic_metric, random_scalar, random_vector


def test_constant_source(flat):
    g = flat.grid
    q = solve_dirichlet(np.full(g.shape, -4.0), flat)
    assert np.abs(q - (1 - g.R ** 2)).max() < 1e-12
    assert np.abs(solve_dirichlet(np.zeros(g.shape), flat)).max() == 0.0


def test_manufactured_mode_two(flat):
    g = flat.grid
    # q = (r^2 - r^4) cos 2 theta has laplacian -12 r^2 cos 2 theta
    exact = (g.R ** 2 - g.R ** 4) * np.cos(2 * g.TH)
    for method in ("dense", "modes"):
        q = solve_dirichlet(-12 * g.R ** 2 * np.cos(2 * g.TH), MetricData.flat(g), method)
        assert np.abs(q - exact).max() < 1e-11


@pytest.mark.parametrize("k", [1, 2, 5])
def test_harmonic_extension(flat, k):
    g = flat.grid
    h = harmonic_extension(lambda th: np.cos(k * th), flat)
    assert np.abs(h - g.R ** k * np.cos(k * g.TH)).max() < 1e-11


def test_convergence_under_refinement():
    errs = []
    for n_r in (8, 16):
        g = DiskGrid(n_r, 64)
        y1, y2 = g.y
        w = 1 - g.R ** 2
        e = np.sin(5 * y1) * np.cos(3 * y2)
        ex = 5 * np.cos(5 * y1) * np.cos(3 * y2)
        ey = -3 * np.sin(5 * y1) * np.sin(3 * y2)
        # laplacian(w e) = e lap w + 2 grad w . grad e + w lap e
        F = -4 * e - 4 * (y1 * ex + y2 * ey) - 34 * w * e
        q = solve_dirichlet(F, MetricData.flat(g))
        errs.append(np.abs(q - w * e).max())
    assert errs[0] > 1e-10
    assert errs[0] / errs[1] >= 100


def test_dense_solver_agrees_with_mode_solver():
    g = DiskGrid(16, 32)
    F = np.exp(g.y[0]) + g.y[1] ** 3
    a = solve_dirichlet(F, MetricData.flat(g), "dense")
    b = solve_dirichlet(F, MetricData.flat(g), "modes")
    assert np.abs(a - b).max() < 1e-11


def test_mode_solver_rejects_curved_metric(deformed):
    with pytest.raises(SolveFailure):
        solve_dirichlet(np.zeros(deformed.grid.shape), deformed, "modes")


def test_solver_residual_on_deformed_metric(deformed):
    g = deformed.grid
    F = np.cos(g.y[0]) * g.y[1]
    q = solve_dirichlet(F, deformed)
    assert np.abs(q[-1]).max() == 0.0
    assert np.abs((laplacian(q, deformed) - F)[:-1]).max() < 1e-8


def test_dirichlet_self_adjoint(deformed):
    g = deformed.grid
    rng = generator(5)
    F1, F2 = random_scalar(rng, g, 3), random_scalar(rng, g, 3)
    a = scalar_inner(solve_dirichlet(F1, deformed), F2, deformed)
    b = scalar_inner(F1, solve_dirichlet(F2, deformed), deformed)
    assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)


def test_leray_examples(flat):
    g = flat.grid
    grad = metric_gradient(1 - g.R ** 2, flat)
    assert np.abs(project(grad, flat)).max() < 1e-12
    rot = np.array([-g.y[1], g.y[0]])
    assert np.abs(project(rot, flat) - rot).max() < 1e-12


def test_leray_orthogonal_to_gradients(deformed):
    g = deformed.grid
    rng = generator(6)
    U = random_vector(rng, g, 3)
    PU, p = leray_project(U, deformed)
    q = (1 - g.R ** 2) * random_scalar(rng, g, 2)
    assert abs(inner_product(PU, metric_gradient(q, deformed), deformed)) < 1e-8 * inner_product(U, U, deformed)
    assert np.abs(divergence(PU, deformed)[:-1]).max() < 1e-8
    assert np.abs(p[-1]).max() == 0.0


@given(st.integers(0, 2 ** 16))
@settings(max_examples=10, deadline=None)
def test_leray_idempotent_and_contracting(seed):
    g = DiskGrid(12, 24)
    rng = generator(seed)
    m = quadratic_metric(rng, g)
    U = random_vector(rng, g, 3)
    PU = project(U, m)
    PPU = project(PU, m)
    assert np.abs(PPU - PU).max() <= 1e-9 * np.abs(PU).max()
    assert inner_product(PU, PU, m) <= inner_product(U, U, m) * (1 + 1e-10)


def test_pressure_closed_forms():
    g = DiskGrid(16, 32)
    z = Trajectory.static(g, [0.0]).metric(0)
    assert np.abs(pressure_solve(z)).max() < 1e-14
    omega, rate = 1.5, 0.7
    rot = Trajectory.from_path(g, rotation_path(g, omega), [0.3]).metric(0)
    assert np.abs(pressure_solve(rot) - omega ** 2 * (g.R ** 2 - 1) / 2).max() < 1e-11
    st_ = Trajectory.from_path(g, strain_path(g, rate), [0.0]).metric(0)
    assert np.abs(pressure_solve(st_) - rate ** 2 * (1 - g.R ** 2) / 2).max() < 1e-11


def test_normal_derivative_flat(flat):
    g = flat.grid
    assert np.abs(normal_derivative((1 - g.R ** 2) / 2, flat) + 1).max() < 1e-12
