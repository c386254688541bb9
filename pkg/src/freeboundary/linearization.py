"""The Euler map, its first and second variations and the modified linearized operator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import c1_norm
from .elliptic import div, leray_project, metric_gradient, normal_derivative, pressure_solve, solver_for
from .fields import values_of
from .metric import CoordinateState, MetricData, Trajectory, metric_from_state


def _metric(state) -> MetricData:
    return state if isinstance(state, MetricData) else metric_from_state(state)


def _ejac(U: np.ndarray, m: MetricData) -> np.ndarray:
    """[i, k] = d_k U^i in Eulerian derivatives."""
    return m.eulerian_jac(U)


def _ehess(u: np.ndarray, m: MetricData) -> np.ndarray:
    """[i, j] = d_i d_j u."""
    du = m.eulerian_grad(u)
    return np.stack([m.eulerian_grad(du[i]) for i in range(2)])


def _lower(W, m):
    return np.einsum("ab...,b...->a...", m.g, W)


def _raise(w, m):
    return np.einsum("ab...,b...->a...", m.g_inv, w)


def _curl(w, grid):
    return grid.d1(w[1]) - grid.d2(w[0])


# -- the Euler map ---------------------------------------------------------------------

def euler_map(state: CoordinateState, m: Optional[MetricData] = None) -> np.ndarray:
    """Phi_i = D_t^2 x_i + d_i p in Eulerian components."""
    if state.A is None or state.V is None:
        raise ValueError("euler_map needs V and A on the state")
    m = m or metric_from_state(state)
    p = pressure_solve(m)
    return state.A + m.eulerian_grad(p)


def euler_map_lagrangian(state: CoordinateState, m: Optional[MetricData] = None) -> np.ndarray:
    """F^a = (dy^a/dx^i) Phi^i."""
    m = m or metric_from_state(state)
    return np.einsum("ai...,i...->a...", m.Jinv, euler_map(state, m))


def perturbed(state: CoordinateState, s: float, dx, dv, da=None) -> CoordinateState:
    A = state.A if da is None else state.A + s * da
    return CoordinateState(state.grid, state.x + s * dx, state.V + s * dv, A, state.t)


# -- first variation --------------------------------------------------------------------

@dataclass
class FirstVariation:
    value: np.ndarray            # Phi'(x) dx, Eulerian
    dp0: np.ndarray
    dp1: np.ndarray
    harmonic: np.ndarray         # dp1 - dx^k d_k p
    a_part: np.ndarray           # -d_i(d_k p dx^k - dp1)

    @property
    def dp(self) -> np.ndarray:
        return self.dp0 + self.dp1


def first_variation_parts(state: CoordinateState, dx, dv, da, m: Optional[MetricData] = None) -> FirstVariation:
    m = m or metric_from_state(state)
    dx, dv, da = values_of(dx), values_of(dv), values_of(da)
    solver = solver_for(m)
    p = pressure_solve(m)
    dp = m.eulerian_grad(p)
    # harmonic with boundary values -dx^k d_k p, so that dp1 vanishes on the ring
    dxdp = np.einsum("k...,k...->...", dx, dp)
    h = solver.solve(np.zeros(m.grid.shape), boundary=-dxdp[-1])
    dp1 = h + dxdp
    dp1[-1] = 0.0
    eV = _ejac(state.V, m)                                        # [i, k] = d_k V^i
    Z = dv - np.einsum("l...,kl...->k...", dx, eV)                # dV^k - dx^l d_l V^k
    eZ = _ejac(Z, m)                                              # [k, i] = d_i Z^k
    rhs = -2.0 * np.einsum("ik...,ki...->...", eV, eZ)
    dp0 = solver.solve(rhs)
    hess = _ehess(p, m)
    a_part = m.eulerian_grad(h)
    val = da + np.einsum("ki...,k...->i...", hess, dx) + m.eulerian_grad(dp0) + a_part
    return FirstVariation(val, dp0, dp1, h, -a_part)


def first_variation(state: CoordinateState, dx, dv, da, m: Optional[MetricData] = None) -> np.ndarray:
    """Phi'(x) dx with dv = D_t dx and da = D_t^2 dx (Eulerian components)."""
    return first_variation_parts(state, dx, dv, da, m).value


def pressure_variation(state: CoordinateState, dx, dv, m: Optional[MetricData] = None) -> np.ndarray:
    """p'(x) dx = dp0 + dp1."""
    z = np.zeros_like(values_of(dx))
    return first_variation_parts(state, dx, dv, z, m).dp


# -- Lagrangian frame ---------------------------------------------------------------------

def lagrangian_to_eulerian_variation(m: MetricData, W, Wd, Wdd):
    """(dx, D_t dx, D_t^2 dx) from W and its modified time derivatives Wd = D^_t W, Wdd = D^_t^2 W."""
    W, Wd, Wdd = values_of(W), values_of(Wd), values_of(Wdd)
    sd, sdd = m.sigma_dot, m.sigma_ddot
    DW = Wd - sd * W
    D2W = Wdd - 2 * sd * Wd + (sd ** 2 - sdd) * W
    J, dV, dA = m.J, m.dV, m.dA
    dx = np.einsum("ib...,b...->i...", J, W)
    dv = np.einsum("ib...,b...->i...", J, DW) + np.einsum("ib...,b...->i...", dV, W)
    da = (np.einsum("ib...,b...->i...", J, D2W) + 2 * np.einsum("ib...,b...->i...", dV, DW)
          + np.einsum("ib...,b...->i...", dA, W))
    return dx, dv, da


@dataclass
class LinearizedPieces:
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    B0W: np.ndarray
    B1Wd: np.ndarray
    AW: np.ndarray
    extra: dict = field(default_factory=dict)


def B0_apply(W, m: MetricData, solver=None):
    """B_0 W with its Dirichlet potential q3 fixed by div B_0 W = -sigma_dot^2 div W."""
    solver = solver or solver_for(m)
    sd = m.sigma_dot
    T = sd * (m.gdot - m.omega - sd * m.g)
    U = _raise(np.einsum("ac...,c...->a...", T, W), m)
    q3 = solver.solve(div(U, m) + sd ** 2 * div(W, m))
    return U - metric_gradient(q3, m), q3


def B1_apply(Wd, m: MetricData, solver=None):
    """B_1 Wd with q2 fixed by div B_1 Wd = 2 sigma_dot div Wd."""
    solver = solver or solver_for(m)
    sd = m.sigma_dot
    T = -(m.gdot - m.omega - 2 * sd * m.g)
    U = _raise(np.einsum("ac...,c...->a...", T, Wd), m)
    q2 = solver.solve(div(U, m) - 2 * sd * div(Wd, m))
    return U - metric_gradient(q2, m), q2


def A_apply(W, m: MetricData, p: Optional[np.ndarray] = None):
    """A W = P(-g^{-1} d((d_c p) W^c)) and q1."""
    p = pressure_solve(m) if p is None else p
    h = np.einsum("a...,a...->...", m.grid.grad(p), W)
    AW, pu = leray_project(-metric_gradient(h, m), m)
    return AW, -pu


def modified_linearized(state, W, Wd, Wdd, m: Optional[MetricData] = None):
    """L_1 W = Wdd + A W - B_0 W - B_1 Wd in the Lagrangian frame; returns (L1W, pieces)."""
    m = m or _metric(state)
    W, Wd, Wdd = values_of(W), values_of(Wd), values_of(Wdd)
    solver = solver_for(m)
    AW, q1 = A_apply(W, m)
    B0W, q3 = B0_apply(W, m, solver)
    B1Wd, q2 = B1_apply(Wd, m, solver)
    out = Wdd + AW - B0W - B1Wd
    return out, LinearizedPieces(q1, q2, q3, B0W, B1Wd, AW)


def B3_apply(W, state: CoordinateState, m: Optional[MetricData] = None) -> np.ndarray:
    """B_3 W^a = -W^c nabla_c Phi^a + W^a div Phi via the pullback of Eulerian derivatives."""
    m = m or metric_from_state(state)
    W = values_of(W)
    Phi = euler_map(state, m)
    ePhi = _ejac(Phi, m)                                               # [j, i] = d_i Phi^j
    nab = np.einsum("ic...,aj...,ji...->ac...", m.J, m.Jinv, ePhi)     # nabla_c Phi^a
    divPhi = ePhi[0, 0] + ePhi[1, 1]
    return -np.einsum("c...,ac...->a...", W, nab) + W * divPhi


def L0_lagrangian(state, W, Wd, Wdd, m: Optional[MetricData] = None) -> np.ndarray:
    """Phi'(x) expressed in the Lagrangian frame."""
    m = m or metric_from_state(state)
    dx, dv, da = lagrangian_to_eulerian_variation(m, W, Wd, Wdd)
    val = first_variation(state, dx, dv, da, m)
    return np.einsum("ai...,i...->a...", m.Jinv, val)


# -- curl identities ---------------------------------------------------------------------

def _fd_time(f: Callable, t: float, h: float):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def curl_identity_residual(path: Callable, W_path: Callable, t: float, grid, h: float = 1e-3,
                           F_path: Optional[Callable] = None) -> dict:
    """Residuals of the time-derivative identities for curl w, curl w~ and curl w-dot.

    ``path(t) -> (x, V, A)``; ``W_path(t) -> (W, d_t W, d_t^2 W)`` at fixed y.  When
    ``F_path`` is absent F = L_1 W is evaluated at t.
    """
    def quantities(s):
        st = CoordinateState(grid, *path(s), t=s)
        m = metric_from_state(st)
        W, Wt, Wtt = (np.asarray(a, dtype=float) for a in W_path(s))
        sd = m.sigma_dot
        Wd = Wt + sd * W
        w = _lower(W, m)
        wd = _lower(Wd, m)
        wt = wd - np.einsum("ab...,b...->a...", m.omega + sd * m.g, W)
        return m, W, Wt, Wtt, Wd, w, wd, wt

    m, W, Wt, Wtt, Wd, w, wd, wt = quantities(t)
    sd = m.sigma_dot
    gck = m.check_g
    Dcurl_w = _fd_time(lambda s: _curl(quantities(s)[5], grid), t, h)
    Dcurl_wt = _fd_time(lambda s: _curl(quantities(s)[7], grid), t, h)
    Dcurl_wd = _fd_time(lambda s: _curl(quantities(s)[6], grid), t, h)
    if F_path is None:
        Wdd = Wtt + 2 * sd * Wt + (m.sigma_ddot + sd ** 2) * W
        F = modified_linearized(m.state, W, Wd, Wdd, m)[0]
    else:
        F = np.asarray(F_path(t), dtype=float)
    Wdd = Wtt + 2 * sd * Wt + (m.sigma_ddot + sd ** 2) * W

    def cw(T, U):
        return _curl(np.einsum("ac...,c...->a...", T, U), grid)

    r96 = Dcurl_w - _curl(wd, grid) - cw(gck, W)
    r97 = Dcurl_wd - _curl(_lower(Wdd, m), grid) - cw(gck, Wd)
    r910 = Dcurl_w - _curl(wt, grid) - cw(gck + m.omega + sd * m.g, W)
    r911 = Dcurl_wt + cw(m.omega_dot + m.sigma_ddot * m.g, W) - _curl(_lower(F, m), grid)
    r912 = _curl(wd, grid) - _curl(wt, grid) - cw(sd * m.g + m.omega, W)
    scale = max(np.abs(Dcurl_w).max(), np.abs(Dcurl_wt).max(), 1.0)
    return {
        "t": t,
        "curl_w": float(np.abs(r96).max()),
        "curl_wdot": float(np.abs(r97).max()),
        "curl_w_tilde_split": float(np.abs(r910).max()),
        "curl_w_tilde": float(np.abs(r911).max()),
        "wdot_vs_tilde": float(np.abs(r912).max()),
        "scale": float(scale),
    }


# -- second variation --------------------------------------------------------------------

def second_variation(state: CoordinateState, dx, dv, ex, ev, m: Optional[MetricData] = None) -> np.ndarray:
    """Phi''(x)(dx, ex) in Eulerian components; dv = D_t dx and ev = D_t ex."""
    m = m or metric_from_state(state)
    dx, dv, ex, ev = (values_of(a) for a in (dx, dv, ex, ev))
    p = pressure_solve(m)
    Dp = m.eulerian_grad(p)
    Hp = _ehess(p, m)
    dP = pressure_variation(state, dx, dv, m)
    eP = pressure_variation(state, ex, ev, m)
    DdP, DeP = m.eulerian_grad(dP), m.eulerian_grad(eP)
    HdP, HeP = _ehess(dP, m), _ehess(eP, m)
    Jd, Je = _ejac(dx, m), _ejac(ex, m)                          # [i, k] = d_k x^i
    Hd = np.stack([_ehess(dx[i], m) for i in range(2)])          # [i, k, l] = d_k d_l x^i
    He = np.stack([_ehess(ex[i], m) for i in range(2)])
    Ld = Hd[:, 0, 0] + Hd[:, 1, 1]
    Le = He[:, 0, 0] + He[:, 1, 1]
    Jv = _ejac(state.V, m)
    Jdv, Jev = _ejac(dv, m), _ejac(ev, m)
    es = np.einsum

    f1 = es("i...,i...->...", Ld, DeP) + es("i...,i...->...", Le, DdP)
    f2 = es("ij...,ij...->...", HdP, Je) + es("ij...,ij...->...", HeP, Jd)
    f3 = (es("j...,ji...,i...->...", Dp, Jd, Le) + es("j...,ji...,i...->...", Dp, Je, Ld)
          + 2 * es("j...,ik...,jki...->...", Dp, Jd, He) + 2 * es("j...,ik...,jki...->...", Dp, Je, Hd))
    f4 = (es("ij...,jk...,ik...->...", Hp, Jd, Je) + es("ij...,ik...,kj...->...", Hp, Jd, Je)
          + es("ij...,ik...,kj...->...", Hp, Je, Jd))
    f5 = (es("lk...,jl...,ki...,ij...->...", Jv, Jv, Jd, Je) + es("lk...,jl...,ki...,ij...->...", Jv, Jv, Je, Jd)
          + es("ki...,lj...,jk...,il...->...", Jv, Jv, Jd, Je))
    f6 = es("jk...,ki...,ij...->...", Jv, Jdv, Je) + es("jk...,ki...,ij...->...", Jv, Jev, Jd) \
        + es("jk...,ij...,ki...->...", Jv, Jdv, Je) + es("jk...,ij...,ki...->...", Jv, Jev, Jd)
    f7 = es("ji...,ij...->...", Jdv, Jev)
    rhs = f1 + 2 * f2 - f3 - 2 * f4 - 2 * f5 + 2 * f6 - 2 * f7
    dep = solver_for(m).solve(rhs)
    out = (es("k...,li...,kl...->i...", Dp, Je, Jd) + es("k...,li...,kl...->i...", Dp, Jd, Je)
           - es("k...,ki...->i...", DeP, Jd) - es("k...,ki...->i...", DdP, Je) + m.eulerian_grad(dep))
    return out


# -- physical and coordinate conditions -----------------------------------------------------

@dataclass
class ConditionReport:
    times: list
    c0_measured: list
    M: list
    N: list
    xdot_1: float
    pdot_1: float
    M_threshold: float
    N_threshold: float
    physical_ok: list
    M_doubling_ok: bool
    N_doubling_ok: bool

    @property
    def thresholds_ok(self) -> bool:
        return self.M_threshold <= 0.125 and self.N_threshold <= 0.125

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["thresholds_ok"] = self.thresholds_ok
        return d


def condition_monitor(traj: Trajectory) -> ConditionReport:
    """c0(t) = min(-nabla_N p), M(t), N(t) = sup |nabla_N p|^{-1} and the 1/8 thresholds."""
    grid = traj.grid
    ps, c0, M, N = [], [], [], []
    for k in range(len(traj)):
        m = traj.metric(k)
        p = pressure_solve(m)
        ps.append(p)
        dn = normal_derivative(p, m)
        c0.append(float((-dn).min()))
        M.append(m.c1())
        amin = float(np.abs(dn).min())
        N.append(float("inf") if amin == 0 else 1.0 / amin)
    xdot = max(c1_norm(s.V, grid) for s in traj.states)
    if len(traj) > 1:
        P = np.array(ps)
        pdot = np.gradient(P, traj.times, axis=0, edge_order=2 if len(traj) > 2 else 1)
        pdot1 = max(c1_norm(q, grid) for q in pdot)
    else:
        pdot1 = 0.0
    T = float(traj.times[-1] - traj.times[0])
    Mth = T * xdot * M[0]
    Nth = T * pdot1 * M[0] * N[0] if np.isfinite(N[0]) else (0.0 if T * pdot1 == 0 else float("inf"))
    return ConditionReport(
        traj.times.tolist(), c0, M, N, float(xdot), float(pdot1), float(Mth), float(Nth),
        [c > 0 for c in c0],
        bool(all(v <= 2 * M[0] * (1 + 1e-12) for v in M)),
        bool(all(v <= 2 * N[0] * (1 + 1e-12) for v in N)) if np.isfinite(N[0]) else True,
    )
