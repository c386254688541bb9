"""Time stepping of the smoothed linearized system."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary.errors import CflViolation
from freeboundary.evolve import (Background, EvolutionConfig, decompose_and_solve, divergence_ode_solve,
                                 evolve_smoothed, solve_L0_picard)
from freeboundary.grid import DiskGrid
from freeboundary.normal_op import stream_field
from freeboundary.suites import oscillator_run


@pytest.fixture(scope="module")
def static():
    g = DiskGrid(24, 48)
    return Background.static(g, 0.25)


def _mode(bg):
    g = bg.grid
    return stream_field((1 - g.R ** 2) * (1 + g.y[0] * g.y[1]), bg.metric(0.0))


def test_config_validation():
    with pytest.raises(CflViolation):
        EvolutionConfig(dt=0.2, T=1.0, epsilon=0.25)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=-0.1)
    cfg = EvolutionConfig(dt=0.03, T=0.1, epsilon=0.25)
    # the horizon rounds up to a whole number of steps
    assert cfg.n_steps == 4
    assert cfg.times[-1] == pytest.approx(0.12)


def test_zero_forcing_stays_zero(static):
    cfg = EvolutionConfig(dt=0.02, T=0.1, epsilon=0.25)
    res = evolve_smoothed(static, lambda t: np.zeros((2,) + static.grid.shape), cfg)
    assert np.abs(res.W).max() == 0.0 and np.abs(res.Z).max() == 0.0


def test_linear_in_forcing(static):
    cfg = EvolutionConfig(dt=0.02, T=0.1, epsilon=0.25)
    e = _mode(static)
    f = stream_field((1 - static.grid.R ** 2) ** 2 * static.grid.y[1], static.metric(0.0))
    a = evolve_smoothed(static, lambda t: np.cos(t) * e, cfg).W
    b = evolve_smoothed(static, lambda t: t * f, cfg).W
    c = evolve_smoothed(static, lambda t: np.cos(t) * e - 2 * t * f, cfg).W
    assert np.abs(c - (a - 2 * b)).max() < 1e-12 * max(np.abs(c).max(), 1e-300) + 1e-15


def test_rejects_divergent_forcing(static):
    cfg = EvolutionConfig(dt=0.02, T=0.04, epsilon=0.25)
    with pytest.raises(ValueError):
        evolve_smoothed(static, lambda t: static.grid.y.copy(), cfg)


def test_forced_oscillator_coarse():
    out = oscillator_run(grid=(12, 24), dt=5e-3)
    assert out["amplitude_err"] < 1e-8
    assert out["div_max"] < 1e-10


def test_csv_columns(static):
    cfg = EvolutionConfig(dt=0.02, T=0.1, epsilon=0.25)
    res = evolve_smoothed(static, lambda t: t * _mode(static), cfg)
    lines = res.csv().splitlines()
    assert lines[0] == "t,E0,E1,divW_max,residual"
    assert len(lines) == len(res.times) + 1
    # the residual column checks the stored trajectory against its time derivative
    assert max(float(r.split(",")[-1]) for r in lines[1:]) < 1e-4


@given(st.floats(-3, 3), st.one_of(st.just(0.0), st.floats(0.1, 4.0)))
@settings(max_examples=15, deadline=None)
def test_divergence_ode(c, w):
    cfg = EvolutionConfig(dt=0.01, T=0.5, epsilon=1.0)
    t = cfg.times
    phi, psi = divergence_ode_solve(lambda s: np.full(3, w * w), lambda s: np.full(3, c), cfg)
    if w == 0:
        exact, rate = c * t ** 2 / 2, c * t
    else:
        exact, rate = c * (1 - np.cos(w * t)) / w ** 2, c * np.sin(w * t) / w
    # fourth-order scheme: exact on polynomials, O(dt^4) otherwise
    tol = 5e-8 * abs(c) + 1e-14
    assert np.abs(phi[:, 0] - exact).max() < tol
    assert np.abs(psi[:, 0] - rate).max() < tol


def test_decomposition_divergence_free_forcing(static):
    cfg = EvolutionConfig(dt=0.02, T=0.06, epsilon=0.25)
    e = _mode(static)
    res = decompose_and_solve(static, lambda t: t * e, cfg)
    assert np.abs(res.W1).max() < 1e-8
    direct = evolve_smoothed(static, lambda t: t * e, cfg).W
    assert np.abs(res.W - direct).max() < 1e-8 * max(np.abs(direct).max(), 1e-300) + 1e-12


def test_picard_exact_on_static_background(static):
    cfg = EvolutionConfig(dt=0.02, T=0.06, epsilon=0.25)
    e = _mode(static)
    out = solve_L0_picard(static, lambda t: t * e, cfg)
    assert out.converged and out.iterations == 1
