"""The Euler map, its variations and the physical condition monitor."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary.grid import DiskGrid
from freeboundary.linearization import (B3_apply, L0_lagrangian, condition_monitor, euler_map,
                                        first_variation, modified_linearized, perturbed,
                                        second_variation)
from freeboundary.metric import (CoordinateState, Trajectory, metric_from_state, polynomial_path,
                                 rotation_path, strain_path)
from freeboundary.suites import _poly_coeffs, generator, random_vector


@pytest.fixture(scope="module")
def background(grid):
    return CoordinateState(grid, *polynomial_path(grid, _poly_coeffs(grid))(0.4), t=0.4)


def test_euler_map_vanishes_on_solutions(grid):
    assert np.abs(euler_map(CoordinateState.identity(grid))).max() < 1e-14
    rot = Trajectory.from_path(grid, rotation_path(grid, 1.2), [0.5]).states[0]
    assert np.abs(euler_map(rot)).max() < 1e-11


def test_euler_map_of_translation(grid):
    a_dd = np.array([0.3, -0.7])
    one = np.ones(grid.shape)
    V = np.array([0.2 * one, 0.1 * one])
    A = a_dd[:, None, None] * one
    st_ = CoordinateState(grid, grid.y + 0.05, V, A)
    assert np.abs(euler_map(st_) - A).max() < 1e-12


def test_euler_map_requires_velocity(grid):
    with pytest.raises(ValueError):
        euler_map(CoordinateState(grid, grid.y.copy()))


def test_first_variation_zero_and_linear(background):
    g = background.grid
    z = np.zeros((2,) + g.shape)
    assert np.abs(first_variation(background, z, z, z)).max() < 1e-14
    rng = generator(4)
    d = [0.3 * random_vector(rng, g, 3) for _ in range(3)]
    e = [0.3 * random_vector(rng, g, 3) for _ in range(3)]
    combo = [2 * a - 3 * b for a, b in zip(d, e)]
    lhs = first_variation(background, *combo)
    rhs = 2 * first_variation(background, *d) - 3 * first_variation(background, *e)
    assert np.abs(lhs - rhs).max() < 1e-10 * max(np.abs(lhs).max(), 1.0)


def test_first_variation_matches_difference_quotient(background):
    g = background.grid
    rng = generator(7)
    dx, dv, da = (0.3 * random_vector(rng, g, 3) for _ in range(3))
    lin = first_variation(background, dx, dv, da)
    h = 1e-4
    fd = (euler_map(perturbed(background, h, dx, dv, da))
          - euler_map(perturbed(background, -h, dx, dv, da))) / (2 * h)
    assert np.abs(fd - lin).max() < 1e-6


def test_second_variation_bilinear_symmetric(background):
    g = background.grid
    rng = generator(8)
    d = [0.3 * random_vector(rng, g, 3) for _ in range(2)]
    e = [0.3 * random_vector(rng, g, 3) for _ in range(2)]
    f = [0.3 * random_vector(rng, g, 3) for _ in range(2)]
    S_de = second_variation(background, *d, *e)
    S_ed = second_variation(background, *e, *d)
    scale = max(np.abs(S_de).max(), 1.0)
    assert np.abs(S_de - S_ed).max() < 1e-10 * scale
    lhs = second_variation(background, *[2 * a + b for a, b in zip(d, f)], *e)
    rhs = 2 * S_de + second_variation(background, *f, *e)
    assert np.abs(lhs - rhs).max() < 1e-10 * scale


def test_modified_operator_splits_off_B3(background):
    g = background.grid
    m = metric_from_state(background)
    rng = generator(9)
    W, Wd, Wdd = (0.3 * random_vector(rng, g, 3) for _ in range(3))
    L1, _ = modified_linearized(background, W, Wd, Wdd, m)
    L0 = L0_lagrangian(background, W, Wd, Wdd, m)
    assert np.abs(L1 - L0 - B3_apply(W, background, m)).max() < 1e-8


def test_B3_vanishes_on_rotation(grid):
    rot = Trajectory.from_path(grid, rotation_path(grid, 1.0), [0.3]).states[0]
    W = random_vector(generator(10), grid, 3)
    assert np.abs(B3_apply(W, rot)).max() < 1e-10


@given(st.floats(0.2, 2.0))
@settings(max_examples=8, deadline=None)
def test_condition_monitor_strain(rate):
    g = DiskGrid(12, 24)
    rep = condition_monitor(Trajectory.from_path(g, strain_path(g, rate), [0.0]))
    # p = rate^2 (1 - r^2) / 2 gives -grad_N p = rate^2 on the circle
    assert rep.c0_measured[0] == pytest.approx(rate ** 2, rel=1e-9)
    assert rep.physical_ok == [True]


def test_condition_monitor_flags_rotation(grid):
    rep = condition_monitor(Trajectory.from_path(grid, rotation_path(grid, 1.0), [0.0, 0.05, 0.1]))
    assert rep.c0_measured[0] == pytest.approx(-1.0, rel=1e-9)
    assert not any(rep.physical_ok)
    static = condition_monitor(Trajectory.static(grid, [0.0, 0.1]))
    assert static.M == pytest.approx([2.0, 2.0]) and static.M_doubling_ok
