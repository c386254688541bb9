"""Tangential vector fields and Lie derivatives."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary.calculus import curl
from freeboundary.errors import MissingTrajectory
from freeboundary.frame import (build_frame, hat_apply, lie_derivative, modified_lie_hat,
                                polynomial_divfree_field, radial_field, rotation_field, time_field,
                                vector_commutator)
from freeboundary.grid import DiskGrid
from freeboundary.suites import lie_div_identity

P1 = polynomial_divfree_field({(2, 1): 0.5, (0, 3): -0.3, (1, 1): 0.2})
P2 = polynomial_divfree_field({(3, 1): -0.4, (1, 2): 0.6, (0, 2): 0.1})


def test_rotation_field_value():
    T, _ = rotation_field().evaluate(np.array([[0.5], [0.0]]))
    assert np.allclose(T[:, 0], [0.0, 0.5], atol=1e-15)


def test_frame_fields_divergence_free():
    g = DiskGrid(24, 48)
    fr = build_frame(g)
    assert len(fr.s1) > 0
    for T in fr.spatial:
        assert np.abs(T.divergence(g)).max() <= 1e-10
        assert np.abs(T.on(g)[0][:, -1]).max() <= 1e-12 or T.kind == "rotation"
    rot = fr.s0[0].on(g)[0][:, -1]
    # the rotation field is tangent to the boundary circle
    assert np.abs(np.einsum("i...,i...->...", rot, g.y[:, -1])).max() < 1e-14
    assert fr.span_report(g)["min_singular"] > 1e-6


def test_build_frame_rejects_collar():
    with pytest.raises(ValueError):
        build_frame(DiskGrid(16, 32), d0=0.6)


def test_lie_of_rotation_along_itself(grid):
    S = rotation_field()
    assert np.abs(lie_derivative(S, S.on(grid)[0], grid, "vector")).max() < 1e-12


def test_vector_lie_derivative_is_commutator(grid):
    LU = lie_derivative(P1, P2.on(grid)[0], grid, "vector")
    assert np.abs(LU - vector_commutator(P1, P2, grid)).max() < 1e-10


def test_lie_commutes_with_d(grid):
    q = np.exp(grid.y[0]) * np.cos(grid.y[1]) + grid.y[0] * grid.y[1] ** 2
    lhs = lie_derivative(P1, grid.grad(q), grid, "oneform")
    rhs = grid.grad(P1.apply(q, grid))
    assert np.abs(lhs - rhs).max() < 1e-9


def test_lie_commutes_with_curl():
    g = DiskGrid(24, 48)
    y1, y2 = g.y
    w = np.array([np.sin(y2) * y1, y1 ** 2 - y2])
    lhs = lie_derivative(P2, curl(w, g), g, "twoform")
    rhs = curl(lie_derivative(P2, w, g, "oneform"), g)
    assert np.abs(lhs - rhs).max() < 1e-9


def test_hat_reduces_to_lie_when_flat(flat):
    g = flat.grid
    W = np.array([g.y[1] ** 2, np.cos(g.y[0])])
    for T in (rotation_field(), radial_field(), P1):
        assert np.abs(modified_lie_hat(T, W, flat) - lie_derivative(T, W, g, "vector")).max() < 1e-13
        assert np.abs(hat_apply(T, W[0], flat) - T.apply(W[0], g)).max() < 1e-13


def test_lie_div_identity_deformed(grid, deformed):
    y1, y2 = grid.y
    W = np.array([y2 * np.cos(y1), y1 - y2 ** 2])
    for T in (rotation_field(), P1, P2):
        assert lie_div_identity(T, W, deformed) < 1e-9


def test_time_field_needs_path(grid):
    with pytest.raises(MissingTrajectory):
        lie_derivative(time_field(), np.zeros(grid.shape), grid, "scalar")
    u = np.ones(grid.shape)
    path = (lambda t: t ** 3 * u)
    d = lie_derivative(time_field(), u, grid, "scalar", context={"path": path, "t": 0.5, "h": 1e-2})
    assert np.abs(d - 0.75).max() < 1e-12


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3))
@settings(max_examples=20, deadline=None)
def test_lie_is_a_derivation(c):
    g = DiskGrid(12, 24)
    T = polynomial_divfree_field({(1, 1): c[0], (2, 0): c[1], (0, 3): c[2]})
    p = 1 + g.y[0] ** 2 - g.y[1]
    q = g.y[0] * g.y[1] ** 2
    lhs = T.apply(p * q, g)
    rhs = p * T.apply(q, g) + q * T.apply(p, g)
    assert np.abs(lhs - rhs).max() < 1e-10
    assert np.abs(T.divergence(g)).max() < 1e-12
