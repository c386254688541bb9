"""Extension across the boundary and the smoothing operators."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeboundary.errors import IllConditionedMoments
from freeboundary.fields import ScalarField
from freeboundary.grid import DiskGrid
from freeboundary.smoothing import (build_moment_kernel, build_mollifier, extend_field, smooth,
                                    smoothing_operator, verify_smoothing)
from freeboundary.suites import extension_reproduction


@pytest.mark.parametrize("K,Lam", [(3, 4.0), (7, 8.0)])
def test_kernel_moments(K, Lam):
    ker = build_moment_kernel(K, Lam)
    mom = ker.moments()
    assert mom[0] == pytest.approx(1.0, abs=1e-12)
    if K == 3:
        assert np.abs(mom[1:]).max() < 1e-10
    assert ker.moment_residuals()["legendre"].max() < 1e-12


def test_kernel_tail_matches_quadrature():
    ker = build_moment_kernel(3, 4.0)
    assert ker.tail(1.0) == pytest.approx(1.0, abs=1e-12)
    assert ker.tail(4.0) == pytest.approx(0.0, abs=1e-14)


def test_kernel_order_limits():
    with pytest.raises(IllConditionedMoments):
        build_moment_kernel(13)
    with pytest.raises(IllConditionedMoments):
        build_moment_kernel(3, 1.0)


def test_mollifier_moments():
    phi = build_mollifier(3)
    mom = phi.moments()
    assert mom[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(mom[1]) < 1e-12


def test_extension_reproduces_polynomials():
    g = DiskGrid(16, 32)
    ker = build_moment_kernel(3, 4.0, powers=(1, 8))
    r = np.linspace(0.0, 1.25, 9)
    th = np.linspace(0, 2 * np.pi, 13)
    R, TH = np.meshgrid(r, th)
    pts = np.array([R.ravel() * np.cos(TH.ravel()), R.ravel() * np.sin(TH.ravel())])
    for u, exact in ((np.ones(g.shape), np.ones(pts.shape[1])), (g.y[0], pts[0])):
        ext = extend_field(ScalarField(g, u), ker, pts)
        assert np.abs(ext - exact).max() < 1e-10
    assert extension_reproduction(g) < 1e-10


def test_extension_needs_grid():
    with pytest.raises(ValueError):
        extend_field(np.ones((16, 32)), build_moment_kernel(3, 4.0), np.zeros((2, 1)))


@pytest.fixture(scope="module")
def sgrid():
    return DiskGrid(16, 32)


def test_constants_preserved(sgrid):
    for theta in (2.0, 8.0):
        assert np.abs(smooth(np.full(sgrid.shape, 2.5), theta, sgrid) - 2.5).max() < 1e-12


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=15, deadline=None)
def test_linear(a, b):
    g = DiskGrid(16, 32)
    u = np.exp(g.y[0]) * np.sin(2 * g.y[1])
    v = g.y[0] * g.y[1] ** 2
    S = smoothing_operator(g, 6.0)
    assert np.abs(S(a * u + b * v) - (a * S(u) + b * S(v))).max() < 1e-12 * (1 + abs(a) + abs(b))


def test_rotation_equivariant(sgrid):
    g = sgrid
    alpha = 0.37
    c, s = np.cos(alpha), np.sin(alpha)

    def f(y1, y2):
        return np.exp(0.5 * y1) * np.cos(y2) + y1 * y2

    u = f(*g.y)
    urot = f(c * g.y[0] - s * g.y[1], s * g.y[0] + c * g.y[1])
    Su = smooth(u, 4.0, g)
    # rotate Su by evaluating its Fourier series at theta + alpha
    k = np.fft.rfftfreq(g.n_theta, 1.0 / g.n_theta)
    Su_rot = np.fft.irfft(np.fft.rfft(Su, axis=-1) * np.exp(1j * k * alpha), n=g.n_theta, axis=-1)
    assert np.abs(smooth(urot, 4.0, g) - Su_rot).max() < 1e-9


def test_theta_validation(sgrid):
    with pytest.raises(ValueError):
        smoothing_operator(sgrid, 0.5)


def test_high_frequency_removed(sgrid):
    g = sgrid
    u = np.cos(9 * g.TH) * g.R ** 9
    assert np.abs(smooth(u, 4.0, g)).max() < 1e-14


def test_verify_report_shape(sgrid):
    rep = verify_smoothing(sgrid, a_list=(0, 1), b_list=(0, 1), thetas=(4, 8))
    assert set(rep.constants) == {"bounded", "gain", "remainder", "increment"}
    assert rep.csv().splitlines()[0] == "estimate,sample,theta,a,b,ratio"
    assert all(np.isfinite(r[-1]) for r in rep.rows)
