"""Differential operators, inner products and norms on disk fields."""
from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

from . import _kernels
from .errors import SingularJacobian
from .fields import OneForm, ScalarField, TwoForm, VectorField, like, values_of
from .grid import DiskGrid
from .metric import CoordinateState, MetricData, Trajectory, inv2


def _grid_of(obj, m: Optional[MetricData] = None) -> DiskGrid:
    if m is not None:
        return m.grid
    return obj.grid


# -- first-order calculus --------------------------------------------------------

def divergence(W, m: MetricData):
    """kappa^{-1} d_a(kappa W^a)."""
    Wv = values_of(W)
    g = m.grid
    out = (g.d1(m.kappa * Wv[0]) + g.d2(m.kappa * Wv[1])) / m.kappa
    return like(W, out, ScalarField)


def euclidean_div(W: np.ndarray, grid: DiskGrid) -> np.ndarray:
    return grid.d1(W[0]) + grid.d2(W[1])


def gradient(q, grid: DiskGrid):
    """Covariant gradient d_a q."""
    return like(q, grid.grad(values_of(q)), OneForm)


def metric_gradient(q: np.ndarray, m: MetricData) -> np.ndarray:
    """g^{ab} d_b q."""
    return np.einsum("ab...,b...->a...", m.g_inv, m.grid.grad(q))


def curl(w, grid: Optional[DiskGrid] = None):
    """(curl w)_12 = d_1 w_2 - d_2 w_1; metric independent."""
    grid = grid or w.grid
    wv = values_of(w)
    out = grid.d1(wv[1]) - grid.d2(wv[0])
    return like(w, out, TwoForm)


def lower_index(W, m: MetricData):
    out = np.einsum("ab...,b...->a...", m.g, values_of(W))
    return like(W, out, OneForm)


def raise_index(w, m: MetricData):
    out = np.einsum("ab...,b...->a...", m.g_inv, values_of(w))
    return like(w, out, VectorField)


def to_lagrangian(dx, state_or_metric):
    """W^a = (dy^a/dx^i) dx^i."""
    m = _as_metric(state_or_metric)
    return like(dx, np.einsum("ai...,i...->a...", m.Jinv, values_of(dx)), VectorField)


def to_eulerian(W, state_or_metric):
    m = _as_metric(state_or_metric)
    return like(W, np.einsum("ia...,a...->i...", m.J, values_of(W)), VectorField)


def _as_metric(obj) -> MetricData:
    if isinstance(obj, MetricData):
        return obj
    from .metric import metric_from_state
    return metric_from_state(obj)


def inner_product(U, W, m: MetricData) -> float:
    """<U, W> = int g_ab U^a W^b kappa dy."""
    Uv, Wv = values_of(U), values_of(W)
    dens = np.einsum("ab...,a...,b...->...", m.g, Uv, Wv) * m.kappa
    return m.grid.integrate(dens)


def norm(W, m: MetricData) -> float:
    return float(np.sqrt(max(inner_product(W, W, m), 0.0)))


def scalar_inner(p, q, m: Optional[MetricData], grid: Optional[DiskGrid] = None) -> float:
    grid = grid or m.grid
    k = 1.0 if m is None else m.kappa
    return grid.integrate(values_of(p) * values_of(q) * k)


# -- norms -----------------------------------------------------------------------

def multi_indices(k: int) -> list[tuple[int, ...]]:
    return list(combinations_with_replacement((0, 1), k))


def derivatives(u: np.ndarray, grid: DiskGrid, k: int) -> np.ndarray:
    """All order-k Cartesian derivatives, shape (k+1, n_r, n_theta)."""
    if k == 0:
        return u[None]
    out = []
    cur = {(): u}
    for order in range(1, k + 1):
        nxt = {}
        for alpha in multi_indices(order):
            parent = cur[alpha[:-1]]
            nxt[alpha] = grid.d1(parent) if alpha[-1] == 0 else grid.d2(parent)
        cur = nxt
    out = [cur[a] for a in multi_indices(k)]
    return np.stack(out)


def _components(u: np.ndarray, grid: DiskGrid) -> list[np.ndarray]:
    u = np.asarray(u, dtype=float)
    return list(u.reshape((-1,) + grid.shape))


def sobolev_norm(field, r: int, m: Optional[MetricData] = None, grid: Optional[DiskGrid] = None) -> float:
    """sum_{|alpha| <= r} ||d^alpha u||_{L^2(dy)}, summed over components."""
    grid = grid or _grid_of(field, m)
    grid.check_order(r)
    total = 0.0
    for u in _components(values_of(field), grid):
        for k in range(r + 1):
            for d in derivatives(u, grid, k):
                total += np.sqrt(grid.integrate(d * d))
    return float(total)


def holder_norm(field, a: float, grid: Optional[DiskGrid] = None, backend: Optional[str] = None) -> float:
    """Hoelder norm ||u||_a on the grid nodes, summed over components.

    Fractional a uses the all-pairs scan of the order-floor(a) derivatives;
    integer a uses sup |u| + sup sum_{|alpha| = a} |d^alpha u|.
    """
    grid = grid or field.grid
    if a < 0:
        raise ValueError("a must be >= 0")
    grid.check_order(np.ceil(a))
    total = 0.0
    pts = grid.y.reshape(2, -1)
    for u in _components(values_of(field), grid):
        total += np.abs(u).max()
        if a == 0:
            continue
        k = int(np.floor(a))
        if a == k:
            total += np.abs(derivatives(u, grid, k)).sum(axis=0).max()
        else:
            D = derivatives(u, grid, k).reshape(k + 1, -1)
            total += _kernels.pair_scan(D, pts, a - k, backend=backend)
    return float(total)


def interpolation_probe(field, a: float, b: float, c: float,
                        grid: Optional[DiskGrid] = None) -> dict:
    """||u||_c / (||u||_a^lam ||u||_b^(1-lam)) with lam a + (1-lam) b = c."""
    if not a <= c <= b:
        raise ValueError("need a <= c <= b")
    grid = grid or field.grid
    lam = 1.0 if b == a else (b - c) / (b - a)
    out = {"lambda": lam}
    h = [holder_norm(field, s, grid) for s in (a, b, c)]
    out["holder"] = h[2] / (h[0] ** lam * h[1] ** (1 - lam)) if h[2] > 0 else 1.0
    if all(float(s).is_integer() for s in (a, b, c)):
        s_ = [sobolev_norm(field, int(s), grid=grid) for s in (a, b, c)]
        out["sobolev"] = s_[2] / (s_[0] ** lam * s_[1] ** (1 - lam)) if s_[2] > 0 else 1.0
    return out


def c1_norm(U: np.ndarray, grid: DiskGrid) -> float:
    """||U||_{1,inf} = sup |U| + sup |dU| (Frobenius over components)."""
    U = np.asarray(U).reshape((-1,) + grid.shape)
    d = np.stack([grid.grad(c) for c in U])
    return float(np.sqrt((U ** 2).sum(axis=0)).max() + np.sqrt((d ** 2).sum(axis=(0, 1))).max())


# -- coordinate monitor ------------------------------------------------------------

def coordinate_monitor(traj: Trajectory, c1: Optional[float] = None) -> dict:
    """M(t) = sup sqrt(|dx/dy|^2 + |dy/dx|^2) along the path and the 1/8 threshold."""
    Ms = np.array([traj.metric(k).c1() for k in range(len(traj))])
    M0 = Ms[0]
    xdot = max(c1_norm(s.V, traj.grid) for s in traj.states)
    T = traj.times[-1] - traj.times[0]
    lhs = T * xdot * M0
    rep = {
        "times": traj.times.tolist(),
        "M": Ms.tolist(),
        "M0": float(M0),
        "doubling_ok": bool(np.all(Ms <= 2 * M0 * (1 + 1e-12))),
        "xdot_1": xdot,
        "threshold_value": lhs,
        "threshold_ok": bool(lhs <= 0.125),
    }
    if c1 is not None:
        rep["c1"] = c1
        rep["c1_ok"] = bool(np.all(Ms <= c1))
    return rep
