"""Dirichlet problems for the Laplace-Beltrami operator, Leray projection, pressure."""
from __future__ import annotations

import weakref
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConditionViolation, SolveFailure
from .fields import ScalarField, VectorField, like, values_of
from .grid import DiskGrid
from .metric import CoordinateState, MetricData, metric_from_state

DENSE_MAX = 48 * 96
TAU_SOLVE = 1e-10


def laplacian(q: np.ndarray, m: MetricData) -> np.ndarray:
    """kappa^{-1} d_a(kappa g^{ab} d_b q), built from the grid's first derivatives."""
    g = m.grid
    dq = g.grad(q)
    flux = m.kappa * np.einsum("ab...,b...->a...", m.g_inv, dq)
    return (g.d1(flux[0]) + g.d2(flux[1])) / m.kappa


def assemble_laplacian(m: MetricData) -> np.ndarray:
    """Dense matrix of `laplacian` (flattened r-major)."""
    D1, D2 = m.grid.D_mats
    D = (D1, D2)
    k = m.kappa.ravel()
    out = np.zeros((m.grid.size, m.grid.size))
    for b in range(2):
        flux = [sp.diags(k * m.g_inv[a, b].ravel()) @ D[b] for a in range(2)]
        inner = (D[0] @ flux[0] + D[1] @ flux[1])
        out += inner.toarray()
    out /= k[:, None]
    return out


def nyquist_penalty(m: MetricData) -> np.ndarray:
    """-(n/2)^2 / r^2 acting on the angular Nyquist mode only.

    First derivatives in theta annihilate the Nyquist mode, so the composed
    operator div(grad) has that mode in its kernel; this term restores the
    missing -m^2/r^2 part there.
    """
    g = m.grid
    n = g.n_theta
    s = (-1.0) ** np.arange(n)
    PN = np.outer(s, s) / n
    scale = 0.5 * (m.g_inv[0, 0] + m.g_inv[1, 1]).mean(axis=1) * (n / 2) ** 2 / g.r ** 2
    return np.kron(np.diag(-scale), PN)


class DirichletSolver:
    """Solves laplacian(q) = F in the interior with q prescribed on r = 1.

    Flat metrics use per-angular-mode radial solves; other metrics use a dense
    LU of the collocation matrix (row replacement on the boundary ring).
    """

    def __init__(self, m: MetricData, method: str = "auto"):
        # the metric caches its solver; a weak back reference avoids a cycle that
        # would keep large factorizations alive until a full gc pass
        self._metric_ref = weakref.ref(m)
        self.grid = m.grid
        if method == "auto":
            if m.is_flat and self.grid.size > 32 * 64:
                method = "modes"
            else:
                method = "dense"
        if method == "dense" and self.grid.size > DENSE_MAX:
            raise SolveFailure(f"dense assembly capped at {DENSE_MAX} nodes, grid {self.grid}")
        if method == "modes" and not m.is_flat:
            raise SolveFailure("mode-separated solve needs a flat metric")
        self.method = method
        if method == "dense":
            self._build_dense()
        else:
            self._build_modes()

    @property
    def metric(self) -> MetricData:
        m = self._metric_ref()
        if m is None:
            raise SolveFailure("the metric of this solver no longer exists")
        return m

    def _build_dense(self):
        L = assemble_laplacian(self.metric) + nyquist_penalty(self.metric)
        nb = self.grid.n_theta
        bidx = np.arange(self.grid.size - nb, self.grid.size)
        L[bidx] = 0.0
        L[bidx, bidx] = 1.0
        try:
            self._lu = sla.lu_factor(L, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
            raise SolveFailure(str(exc)) from exc
        d = np.abs(np.diag(self._lu[0]))
        if d.min() < 1e-14 * d.max():
            raise SolveFailure("collocation matrix is numerically singular")

    def _build_modes(self):
        g = self.grid
        ir = 1.0 / g.r
        self._mode_lu = []
        for k in range(g.n_theta // 2 + 1):
            D1, D2 = g.mode_radial(k)
            L = D2 + ir[:, None] * D1 - np.diag(k * k * ir ** 2)
            L[-1] = 0.0
            L[-1, -1] = 1.0
            self._mode_lu.append(sla.lu_factor(L))

    def solve(self, F: np.ndarray, boundary: Optional[np.ndarray] = None) -> np.ndarray:
        g = self.grid
        rhs = np.array(F, dtype=float, copy=True)
        rhs[-1] = 0.0 if boundary is None else boundary
        if self.method == "dense":
            q = sla.lu_solve(self._lu, rhs.ravel(), check_finite=False).reshape(g.shape)
        else:
            c = np.fft.rfft(rhs, axis=-1)
            out = np.empty_like(c)
            for k, lu in enumerate(self._mode_lu):
                out[:, k] = sla.lu_solve(lu, c[:, k])
            q = np.fft.irfft(out, n=g.n_theta, axis=-1)
        return q

    def residual(self, q: np.ndarray, F: np.ndarray) -> float:
        res = laplacian(q, self.metric) - F
        return float(np.abs(res[:-1]).max() / max(np.abs(F).max(), 1e-300))


def solver_for(m: MetricData, method: str = "auto") -> DirichletSolver:
    key = ("dirichlet", method)
    if key not in m._cache:
        m._cache[key] = DirichletSolver(m, method)
    return m._cache[key]


def solve_dirichlet(F, m: MetricData, method: str = "auto"):
    Fv = values_of(F)
    _check_condition(m)
    q = solver_for(m, method).solve(Fv)
    return like(F, q, ScalarField)


def _check_condition(m: MetricData, cmax: float = 1e6) -> None:
    if not np.all(np.isfinite(m.g_inv)) or np.abs(m.g_inv).max() > cmax:
        raise ConditionViolation("inverse metric is unbounded")


def harmonic_extension(boundary_values: Union[Callable, np.ndarray], m: MetricData,
                       method: str = "auto") -> np.ndarray:
    g = m.grid
    if callable(boundary_values):
        b = np.asarray(boundary_values(g.theta), dtype=float)
    else:
        b = np.asarray(boundary_values, dtype=float)
    _check_condition(m)
    return solver_for(m, method).solve(np.zeros(g.shape), boundary=b)


def metric_gradient(q: np.ndarray, m: MetricData) -> np.ndarray:
    return np.einsum("ab...,b...->a...", m.g_inv, m.grid.grad(q))


def div(W: np.ndarray, m: MetricData) -> np.ndarray:
    g = m.grid
    return (g.d1(m.kappa * W[0]) + g.d2(m.kappa * W[1])) / m.kappa


def leray_project(U, m: MetricData, method: str = "auto"):
    """PU = U - g^{ab} d_b p_U with laplacian(p_U) = div U and p_U = 0 on r = 1."""
    Uv = values_of(U)
    p = solver_for(m, method).solve(div(Uv, m))
    PU = Uv - metric_gradient(p, m)
    return like(U, PU, VectorField), like(U, p, ScalarField) if hasattr(U, "grid") else p


def project(U: np.ndarray, m: MetricData, method: str = "auto") -> np.ndarray:
    return leray_project(U, m, method)[0]


def pressure_rhs(m: MetricData) -> np.ndarray:
    eV = np.einsum("ia...,ak...->ik...", m.dV, m.Jinv)
    return -np.einsum("ik...,ki...->...", eV, eV)


def pressure_solve(state: Union[CoordinateState, MetricData], method: str = "auto") -> np.ndarray:
    """p with laplacian(p) = -(d_i V^k)(d_k V^i), p = 0 on the boundary."""
    m = state if isinstance(state, MetricData) else metric_from_state(state)
    if m.dV is None:
        raise ValueError("pressure_solve needs the velocity V")
    if "pressure" not in m._cache:
        m._cache["pressure"] = solver_for(m, method).solve(pressure_rhs(m))
    return m._cache["pressure"]


def normal_derivative(p: np.ndarray, m: MetricData) -> np.ndarray:
    """nabla_N p on the boundary ring: g^{ab} n_a d_b p / |n|_g with n_a = y_a."""
    g = m.grid
    n = g.y[:, -1, :]
    dp = g.grad(p)[:, -1, :]
    gi = m.g_inv[:, :, -1, :]
    num = np.einsum("ab...,a...,b...->...", gi, n, dp)
    den = np.sqrt(np.einsum("ab...,a...,b...->...", gi, n, n))
    return num / den


def tame_estimate_probe(q: np.ndarray, m: MetricData, r: int) -> dict:
    """Compare ||g^{ab}d_b q||_r and ||q||_{r+1} with sum_s ||g||_{r-s,inf} ||laplacian q||_s."""
    from .calculus import holder_norm, sobolev_norm
    if r > 3:
        raise ValueError("r <= 3")
    g = m.grid
    W = metric_gradient(q, m)
    F = laplacian(q, m)
    lhs_W = sobolev_norm(W, r, grid=g)
    lhs_q = sobolev_norm(q, r + 1, grid=g)
    rhs = 0.0
    for s in range(r + 1):
        gn = holder_norm(np.concatenate([m.g.reshape(4, *g.shape), m.g_inv.reshape(4, *g.shape)]), r - s, g)
        rhs += gn * sobolev_norm(F, s, grid=g)
    ratio_W = lhs_W / rhs if rhs > 0 else (0.0 if lhs_W == 0 else np.inf)
    ratio_q = lhs_q / rhs if rhs > 0 else (0.0 if lhs_q == 0 else np.inf)
    return {"lhs_W": lhs_W, "lhs_q": lhs_q, "rhs": rhs, "ratio_W": ratio_W, "ratio_q": ratio_q}
