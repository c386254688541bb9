"""Nash-Moser iteration on toy problems and the initial-data reductions."""
import json

import numpy as np
import pytest

from freeboundary.grid import DiskGrid
from freeboundary.nashmoser import (Schedule, ladder_orders, power_series_init, run, shift_forcing,
                                    toy_problem)
from freeboundary.suites import toy_data


@pytest.fixture(scope="module")
def toy():
    return toy_problem("quadratic-scalar-field", DiskGrid(16, 32), n_t=4)


@pytest.fixture(scope="module")
def toy_run(toy):
    f = toy_data(toy)
    return f, run(toy, Schedule.for_problem(toy), f, max_iter=10, warn=False)


def test_theta_schedule_doubles():
    s = Schedule(theta0=1.5)
    assert [s.theta(i) for i in range(5)] == [1.5, 3.0, 6.0, 12.0, 24.0]


def test_dimension_schedule():
    s = Schedule.for_dimension(2)
    assert s.mu == 5
    assert s.alpha > s.lam + 2 * s.mu and not float(s.alpha).is_integer()


@pytest.mark.parametrize("kw", [dict(alpha=14.0), dict(alpha=12.5), dict(theta0=0.5), dict(delta=-1.0)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        Schedule(**kw)


def test_ladder_orders():
    s = Schedule(0.0, 0.0, 0.0, 3.75)
    assert ladder_orders(s) == [0.0, 1.0, 2.0, 3.0, 3.5]


def test_zero_forcing_converges_immediately(toy):
    rep = run(toy, Schedule.for_problem(toy), np.zeros_like(toy.zero), warn=False)
    assert rep.converged and rep.iterations == 0
    assert np.abs(rep.u).max() == 0.0


def test_matches_newton_reference(toy, toy_run):
    f, rep = toy_run
    ref = toy.reference(f)
    assert rep.converged
    assert np.abs(rep.u - ref).max() <= 1e-8 * np.abs(ref).max()
    assert np.abs(toy.phi(rep.u) - f).max() <= 1e-10 * np.abs(f).max()


def test_telescoping_and_monotone(toy_run):
    f, rep = toy_run
    assert max(rep.telescoping) < 1e-9
    res = rep.residuals[0.0]
    floor = 1e-12 * np.abs(f).max()
    tail = [r for r in res[2:] if r > floor]
    assert all(b <= a for a, b in zip(tail, tail[1:]))


def test_report_json(toy_run):
    data = json.loads(toy_run[1].to_json())
    assert data["converged"] is True and "u" not in data


@pytest.mark.parametrize("kind", ["quadratic-scalar-field", "perturbed-identity"])
def test_first_order_scaling(kind):
    prob = toy_problem(kind, DiskGrid(16, 32), n_t=3)
    f = 1e-3 * toy_data(prob)
    s = Schedule.for_problem(prob)
    u1 = run(prob, s, f, max_iter=10, warn=False).u
    u2 = run(prob, s, 2 * f, max_iter=10, warn=False).u
    assert np.abs(u2 - 2 * u1).max() <= 1e-2 * np.abs(u1).max()


def test_unknown_kind():
    with pytest.raises(ValueError):
        toy_problem("cubic")


def test_shift_forcing():
    F0 = (lambda t: np.full(3, 1.0 + t))
    assert np.abs(shift_forcing(F0, 0.0)(0.4)).max() == 0.0
    f = shift_forcing(F0, 0.2, T=1.0)
    assert np.allclose(f(0.1), -1.1)
    assert np.allclose(f(0.5), -0.2)
    with pytest.raises(ValueError):
        shift_forcing(F0, -0.1)
    with pytest.raises(ValueError):
        shift_forcing(F0, 1.0, T=1.0)


def test_power_series_of_rotation():
    g = DiskGrid(16, 32)
    v0 = np.array([-g.y[1], g.y[0]])
    init = power_series_init(g, g.y.copy(), v0, m=2)
    # rigid rotation: the acceleration is centripetal
    assert np.abs(init.coeffs[2] + g.y).max() < 1e-10
    assert np.abs(init.derivative(0.0, 1) - v0).max() == 0.0
    with pytest.raises(ValueError):
        power_series_init(g, g.y, v0, m=4)


def test_power_series_at_rest():
    g = DiskGrid(16, 32)
    init = power_series_init(g, g.y.copy(), np.zeros((2,) + g.shape), m=3)
    assert np.abs(init.forcing(0.3)).max() < 1e-12
