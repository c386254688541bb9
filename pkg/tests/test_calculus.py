"""Grid, metric data, index gymnastics and norms."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary import fields
from freeboundary.calculus import (coordinate_monitor, curl, derivatives, divergence, holder_norm,
                                   inner_product, lower_index, raise_index, sobolev_norm, to_eulerian,
                                   to_lagrangian)
from freeboundary.errors import ResolutionExceeded, SingularJacobian
from freeboundary.grid import DiskGrid
from freeboundary.metric import (CoordinateState, MetricData, Trajectory, metric_from_state,
                                 rotation_path)

from conftest import state_with

coeff = st.floats(-2.0, 2.0, allow_nan=False)


def test_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        DiskGrid(4, 32)
    with pytest.raises(ValueError):
        DiskGrid(16, 31)


def test_area_and_polynomial_moments(grid):
    y1, y2 = grid.y
    assert grid.integrate(np.ones(grid.shape)) == pytest.approx(np.pi, abs=1e-12)
    # int r^2 over the disk = pi / 2, int y1^2 y2^2 = pi / 24
    assert grid.integrate(y1 ** 2 + y2 ** 2) == pytest.approx(np.pi / 2, abs=1e-12)
    assert grid.integrate(y1 ** 2 * y2 ** 2) == pytest.approx(np.pi / 24, abs=1e-12)


@given(st.lists(coeff, min_size=6, max_size=6))
@settings(max_examples=25, deadline=None)
def test_derivatives_exact_on_quadratics(c):
    g = DiskGrid(8, 16)
    y1, y2 = g.y
    u = c[0] + c[1] * y1 + c[2] * y2 + c[3] * y1 * y1 + c[4] * y1 * y2 + c[5] * y2 * y2
    d1 = c[1] + 2 * c[3] * y1 + c[4] * y2
    d2 = c[2] + c[4] * y1 + 2 * c[5] * y2
    assert np.abs(g.d1(u) - d1).max() < 1e-11
    assert np.abs(g.d2(u) - d2).max() < 1e-11


def test_derivatives_budget(small_grid):
    with pytest.raises(ResolutionExceeded):
        sobolev_norm(np.ones(small_grid.shape), 3, grid=small_grid)
    assert derivatives(np.ones(small_grid.shape), small_grid, 2).shape == (3,) + small_grid.shape


def test_identity_metric(grid):
    m = metric_from_state(CoordinateState.identity(grid))
    I = np.eye(2)[:, :, None, None]
    assert np.abs(m.g - I).max() < 1e-12
    assert np.abs(m.kappa - 1).max() < 1e-12
    assert np.abs(m.sigma).max() < 1e-12


def test_dilation_metric(grid):
    m = metric_from_state(state_with(grid, 2 * grid.y))
    assert np.abs(m.g - 4 * np.eye(2)[:, :, None, None]).max() < 1e-12
    assert np.abs(m.kappa - 4).max() < 1e-12
    assert np.abs(m.sigma - np.log(4)).max() < 1e-12


def test_rotation_is_isometry(grid):
    traj = Trajectory.from_path(grid, rotation_path(grid, 1.3), [0.7])
    m = traj.metric(0)
    assert np.abs(m.g - np.eye(2)[:, :, None, None]).max() < 1e-12
    assert np.abs(m.kappa - 1).max() < 1e-12


def test_singular_map_rejected(grid):
    x = np.array([grid.y[0], 0 * grid.y[1]])
    with pytest.raises(SingularJacobian):
        metric_from_state(state_with(grid, x))


def test_divergence_examples(flat):
    y1, y2 = flat.grid.y
    assert np.abs(divergence(np.array([-y2, y1]), flat)).max() < 1e-12
    assert np.abs(divergence(np.array([y1, y2]), flat) - 2).max() < 1e-12


def test_divergence_of_pushforward_is_metric_divergence(grid, deformed):
    # W = J^{-1} U with U divergence-free in x has kappa^{-1} d(kappa W) = 0
    U = np.array([np.ones(grid.shape), np.zeros(grid.shape)])
    W = np.einsum("ai...,i...->a...", deformed.Jinv, U)
    assert np.abs(divergence(W, deformed)).max() < 1e-9


def test_curl_examples():
    grid = DiskGrid(24, 48)
    y1, y2 = grid.y
    q = np.exp(y1) * np.sin(2 * y2) + y1 ** 3
    assert np.abs(curl(grid.grad(q), grid)).max() < 1e-10
    assert np.abs(curl(np.array([-y2, y1]), grid) - 2).max() < 1e-12


def test_typed_fields_keep_their_kind(grid):
    y1, y2 = grid.y
    w = fields.OneForm(grid, np.array([-y2, y1]))
    c = curl(w)
    assert isinstance(c, fields.TwoForm)
    assert np.abs(c.values - 2).max() < 1e-12


def test_raise_lower_roundtrip(grid, deformed):
    W = np.array([np.cos(grid.y[0]), grid.y[1] ** 2])
    back = raise_index(lower_index(W, deformed), deformed)
    assert np.abs(back - W).max() < 1e-12


def test_lagrangian_roundtrip(grid, deformed):
    dx = np.array([np.sin(grid.y[1]), 1 + grid.y[0]])
    back = to_eulerian(to_lagrangian(dx, deformed), deformed)
    assert np.abs(back - dx).max() < 1e-12
    assert np.abs(to_lagrangian(dx, deformed.state) - to_lagrangian(dx, deformed)).max() < 1e-14


def test_inner_product_examples(flat, deformed):
    g = flat.grid
    e1 = np.array([np.ones(g.shape), np.zeros(g.shape)])
    assert inner_product(e1, e1, flat) == pytest.approx(np.pi, abs=1e-10)
    U = np.array([g.y[0] ** 2, g.y[1]])
    W = np.array([np.cos(g.y[1]), g.y[0] * g.y[1]])
    assert inner_product(U, W, deformed) == pytest.approx(inner_product(W, U, deformed), abs=1e-14)
    assert inner_product(U, U, deformed) > 0


@given(coeff)
@settings(max_examples=20, deadline=None)
def test_norms_of_constants(c):
    g = DiskGrid(8, 16)
    u = np.full(g.shape, c)
    assert sobolev_norm(u, 0, grid=g) == pytest.approx(abs(c) * np.sqrt(np.pi), abs=1e-12)
    assert sobolev_norm(u, 2, grid=g) == pytest.approx(abs(c) * np.sqrt(np.pi), abs=1e-10)
    assert holder_norm(u, 0, g) == pytest.approx(abs(c), abs=1e-14)
    assert holder_norm(u, 1.5, g) == pytest.approx(abs(c), abs=1e-10)


def test_holder_of_y1(grid):
    assert holder_norm(grid.y[0], 1, grid) == pytest.approx(2.0, abs=1e-12)


def _brute_holder(u, a, g):
    pts = g.y.reshape(2, -1).T
    v = u.ravel()
    best = 0.0
    for i, j in itertools.combinations(range(len(v)), 2):
        d = np.hypot(*(pts[i] - pts[j]))
        if d > 1e-14:
            best = max(best, abs(v[i] - v[j]) / d ** a)
    return best


def test_holder_fractional_against_pair_loop(small_grid):
    g = small_grid
    u = np.sin(2 * g.y[0]) + g.y[1] ** 2
    expect = np.abs(u).max() + _brute_holder(u, 0.5, g)
    for backend in ("python", "compiled"):
        assert holder_norm(u, 0.5, g, backend=backend) == pytest.approx(expect, rel=1e-12)


def test_coordinate_monitor(grid):
    times = [0.0, 0.1, 0.2]
    rep = coordinate_monitor(Trajectory.static(grid, times))
    assert rep["M"] == pytest.approx([2.0] * 3, abs=1e-12)
    assert rep["threshold_ok"] and rep["doubling_ok"]
    rot = coordinate_monitor(Trajectory.from_path(grid, rotation_path(grid, 1.0), times))
    assert np.ptp(rot["M"]) < 1e-10


def test_snapshot_roundtrip_is_byte_stable(grid, tmp_path):
    u = np.exp(grid.y[0]) * np.cos(grid.y[1])
    text = fields.dumps(grid, u)
    g2, v, kind = fields.loads(text)
    assert g2 == grid and kind == "scalar"
    assert np.array_equal(v, u)
    assert fields.dumps(g2, v) == text
    fields.save(tmp_path / "u.txt", grid, np.array([u, u]), "vector")
    assert fields.load(tmp_path / "u.txt")[2] == "vector"
