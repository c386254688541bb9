"""C-infinity transition profiles with prescribed plateaus."""
from __future__ import annotations

import numpy as np
from scipy.special import expit


def step(t, order: int = 0):
    """Smooth step: 0 for t <= 0, 1 for t >= 1, and its derivatives up to order 3.

    S = e(t) / (e(t) + e(1-t)) with e(t) = exp(-1/t).
    """
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.where(inside, t, 0.5)
    S = expit(1.0 / (1.0 - tc) - 1.0 / tc)
    if order == 0:
        return np.where(t >= 1, 1.0, np.where(inside, S, 0.0))
    u = 1.0 / tc ** 2 + 1.0 / (1.0 - tc) ** 2
    du = -2.0 / tc ** 3 + 2.0 / (1.0 - tc) ** 3
    d2u = 6.0 / tc ** 4 + 6.0 / (1.0 - tc) ** 4
    S1 = S * (1.0 - S) * u
    if order == 1:
        out = S1
    else:
        S2 = S1 * (1.0 - 2.0 * S) * u + S * (1.0 - S) * du
        if order == 2:
            out = S2
        elif order == 3:
            out = (S2 * (1.0 - 2.0 * S) * u - 2.0 * S1 ** 2 * u
                   + 2.0 * S1 * (1.0 - 2.0 * S) * du + S * (1.0 - S) * d2u)
        else:
            raise ValueError("order <= 3")
    return np.where(inside, out, 0.0)


def plateau(s, inner: float, outer: float, order: int = 0):
    """Even profile equal to 1 on |s| <= inner, 0 on |s| >= outer (and derivatives)."""
    s = np.asarray(s, dtype=float)
    w = outer - inner
    a = np.abs(s)
    t = (outer - a) / w
    val = step(t, order)
    if order == 0:
        return val
    sgn = np.sign(s)
    return val * (-sgn / w) ** order


def ramp(s, lo: float, hi: float, order: int = 0):
    """Increasing profile: 0 for s <= lo, 1 for s >= hi."""
    s = np.asarray(s, dtype=float)
    w = hi - lo
    return step((s - lo) / w, order) / w ** order


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def rho_of_d(d, order: int = 0):
    """Smoothed distance: rho = d for d <= 1/4, rho = 1/2 for d >= 3/4, rho' >= 0."""
    d = np.asarray(d, dtype=float)
    if order == 1:
        return 1.0 - ramp(d, 0.25, 0.75)
    if order == 2:
        return -ramp(d, 0.25, 0.75, 1)
    x, w = _gl(48)
    dc = np.clip(d, 0.25, 0.75)
    half = 0.5 * (dc - 0.25)
    s = 0.25 + half[..., None] * (x + 1.0)
    integral = (half[..., None] * w * (1.0 - ramp(s, 0.25, 0.75))).sum(axis=-1)
    out = np.where(d <= 0.25, d, 0.25 + integral)
    return np.where(d >= 0.75, 0.5, out)


def chi(rho, order: int = 0):
    """0 for rho <= 1/4, 1 for rho >= 3/4."""
    return ramp(rho, 0.25, 0.75, order)


# -- one-dimensional template for interior tangential fields -----------------------

_P_IN, _P_OUT = 0.25, 0.375
_B_LO, _B_MID, _B_HI = 0.375, 0.4375, 0.5


def _bump(a, order=0):
    """Bump on 3/8 < a < 1/2: product of rising and falling steps."""
    up = [ramp(a, _B_LO, _B_MID, k) for k in range(order + 1)]
    dn = [ramp(-a, -_B_HI, -_B_MID, k) * (-1) ** k for k in range(order + 1)]
    from math import comb
    return sum(comb(order, k) * up[k] * dn[order - k] for k in range(order + 1))


def _bump_mass():
    x, w = _gl(64)
    tot = 0.0
    for lo, hi in ((_B_LO, _B_MID), (_B_MID, _B_HI)):
        s = 0.5 * (hi - lo) * (x + 1) + lo
        tot += 0.5 * (hi - lo) * np.sum(w * _bump(s))
    pl = 0.0
    s = 0.5 * (_P_OUT - _P_IN) * (x + 1) + _P_IN
    pl = 2 * _P_IN + 2 * 0.5 * (_P_OUT - _P_IN) * np.sum(w * plateau(s, _P_IN, _P_OUT))
    return pl / (2 * tot)


_LAMBDA = None


def template_h(s, order: int = 0):
    """h = 1 on |s| <= 1/4, supported in |s| < 1/2, with zero integral."""
    global _LAMBDA
    if _LAMBDA is None:
        _LAMBDA = _bump_mass()
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    sgn = np.sign(s) ** order
    return plateau(s, _P_IN, _P_OUT, order) - _LAMBDA * _bump(a, order) * sgn


_BREAKS = np.array([-0.5, -_B_MID, -_P_OUT, -_P_IN, _P_IN, _P_OUT, _B_MID, 0.5])


def template_g(s):
    """g(s) = int_{-1/2}^s h; vanishes for |s| >= 1/2 since int h = 0."""
    s = np.asarray(s, dtype=float)
    x, w = _gl(40)
    out = np.zeros_like(s)
    sc = np.clip(s, -0.5, 0.5)
    for lo, hi in zip(_BREAKS[:-1], _BREAKS[1:]):
        top = np.clip(sc, lo, hi)
        half = 0.5 * (top - lo)
        pts = lo + half[..., None] * (x + 1.0)
        out += (half[..., None] * w * template_h(pts)).sum(axis=-1)
    return np.where(np.abs(s) >= 0.5, 0.0, out)


def template_f(s, order: int = 0):
    """f = 1 on |s| <= 1/4, 0 on |s| >= 1/2."""
    return plateau(s, 0.25, 0.5, order)
