"""The normal operator, its collar smoothing and the base energy."""
import numpy as np
import pytest

from freeboundary.calculus import inner_product
from freeboundary.elliptic import pressure_solve, project
from freeboundary.errors import CollarTooThin, NegativeEnergy
from freeboundary.grid import DiskGrid
from freeboundary.metric import MetricData, Trajectory, rotation_path
from freeboundary.normal_op import (CollarProfile, OperatorHandle, base_energy, divfree_basis,
                                    mult_op_projected, normal_op, normal_op_handle, smoothed_normal_op,
                                    stream_field, subspace_spectrum)
from freeboundary.suites import generator, random_scalar


def _rotation_metric(g):
    return Trajectory.from_path(g, rotation_path(g, 1.0), [0.2]).metric(0)


def test_rotation_field_in_kernel(grid):
    m = _rotation_metric(grid)
    p = pressure_solve(m)
    W = np.array([-grid.y[1], grid.y[0]])
    assert np.abs(normal_op(p, W, m)).max() < 1e-11


def test_symmetric_on_divergence_free_fields(deformed):
    g = deformed.grid
    f = (1 - g.R ** 2) * (1 + 0.3 * g.y[0])
    rep = subspace_spectrum(normal_op_handle(f, deformed), deformed, divfree_basis(deformed, 4))
    assert rep["asymmetry"] <= 1e-8
    assert rep["min_eig"] >= -1e-9


def test_depends_only_on_normal_derivative(deformed):
    g = deformed.grid
    rng = generator(2)
    f = (1 - g.R ** 2) * (1 + 0.2 * g.y[1])
    h = random_scalar(rng, g, 2)
    W = project(stream_field(random_scalar(rng, g, 3), deformed), deformed)
    a = normal_op(f, W, deformed)
    b = normal_op(f + (1 - g.R ** 2) ** 2 * h, W, deformed)
    assert np.abs(a - b).max() <= 1e-8 * max(np.abs(a).max(), 1.0)


def _interior_stream(g, radius=0.5):
    """Analytic stream field of (radius^2 - r^2)^4, cut off outside the ball."""
    y1, y2 = g.y
    s = radius ** 2 - g.R ** 2
    dpsi = np.where(s > 0, 4 * s ** 3, 0.0) * -2 * np.array([y1, y2])
    return np.array([dpsi[1], -dpsi[0]])


def test_smoothed_vanishes_away_from_collar():
    g = DiskGrid(24, 48)
    m = MetricData.flat(g)
    prof = CollarProfile(g, 0.25)
    f = (1 - g.R ** 2) / 2
    assert np.abs(smoothed_normal_op(f, _interior_stream(g), m, prof)).max() == 0.0


def test_smoothed_nonnegative(deformed):
    g = DiskGrid(24, 48)
    m = MetricData.flat(g)
    prof = CollarProfile(g, 0.5)
    f = (1 - g.R ** 2) / 2
    rng = generator(3)
    for _ in range(3):
        W = project(stream_field(random_scalar(rng, g, 4), m), m)
        assert inner_product(W, smoothed_normal_op(f, W, m, prof), m) >= -1e-9


def test_collar_too_thin():
    with pytest.raises(CollarTooThin):
        CollarProfile(DiskGrid(8, 16), 0.05)


def test_mult_op_with_metric_is_identity(deformed):
    g = deformed.grid
    W = project(stream_field(np.sin(g.y[0]) * g.y[1] + g.y[0] ** 3, deformed), deformed)
    assert np.abs(mult_op_projected(deformed.g, W, deformed) - W).max() < 1e-9


def test_base_energy_values(flat):
    g = flat.grid
    z = np.zeros((2,) + g.shape)
    e1 = np.array([np.ones(g.shape), np.zeros(g.shape)])
    A0 = OperatorHandle(lambda W: 0 * W, g)
    assert base_energy(z, e1, flat, A0) == pytest.approx(np.pi, abs=1e-10)
    rot = np.array([-g.y[1], g.y[0]])
    assert base_energy(rot, z, flat, A0) == pytest.approx(np.pi / 2, abs=1e-10)
    with pytest.raises(NegativeEnergy):
        base_energy(rot, z, flat, OperatorHandle(lambda W: -W, g))


def test_dense_matches_apply(small_grid):
    m = MetricData.flat(small_grid)
    f = (1 - small_grid.R ** 2) / 2
    op = normal_op_handle(f, m)
    W = np.array([small_grid.y[1] ** 2, small_grid.y[0]])
    assert np.abs(op.dense() @ W.ravel() - op(W).ravel()).max() < 1e-11
