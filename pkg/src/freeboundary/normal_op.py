"""The normal operator A_f, its smoothed version, projected multiplications, energy."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .calculus import inner_product
from .cutoffs import chi, rho_of_d
from .elliptic import metric_gradient, project
from .errors import CollarTooThin, NegativeEnergy
from .fields import values_of
from .grid import DiskGrid
from .metric import MetricData


def _contract_grad(f: np.ndarray, W: np.ndarray, grid: DiskGrid) -> np.ndarray:
    return np.einsum("a...,a...->...", grid.grad(f), W)


def normal_op(f, W, m: MetricData) -> np.ndarray:
    """A_f W = P(-g^{ab} d_b((d_c f) W^c)) for f vanishing on the boundary."""
    fv, Wv = values_of(f), values_of(W)
    h = _contract_grad(fv, Wv, m.grid)
    return project(-metric_gradient(h, m), m)


@dataclass
class CollarProfile:
    """Smoothed distance rho(d), d = 1 - |y|, and the collar cutoff chi(rho / eps)."""
    grid: DiskGrid
    epsilon: float
    rho: np.ndarray = field(init=False)
    drho: np.ndarray = field(init=False)
    chi_eps: np.ndarray = field(init=False)
    dchi_eps: np.ndarray = field(init=False)

    def __post_init__(self):
        g = self.grid
        d = 1.0 - g.R
        self.rho = rho_of_d(d)
        rp = rho_of_d(d, 1)
        self.drho = -rp * g.y / g.R          # d_a rho = rho'(d) d_a d
        self.chi_eps = chi(self.rho / self.epsilon)
        self.dchi_eps = chi(self.rho / self.epsilon, 1) / self.epsilon
        band = (d[:, 0] >= self.epsilon / 4) & (d[:, 0] <= 3 * self.epsilon / 4)
        if band.sum() < 4:
            raise CollarTooThin(f"only {band.sum()} radial nodes resolve the collar at eps={self.epsilon}")

    def f_over_rho(self, f: np.ndarray) -> np.ndarray:
        """f / rho; at the boundary ring use the one-sided limit -d_r f."""
        out = np.empty_like(f)
        out[:-1] = f[:-1] / self.rho[:-1]
        out[-1] = -self.grid.dr(f)[-1]
        return out


def smoothed_normal_op(f, W, m: MetricData, profile: CollarProfile) -> np.ndarray:
    """A_f^eps W = P(g^{ab} (f/rho) chi_eps' (d_b rho)(d_c rho) W^c)."""
    fv, Wv = values_of(f), values_of(W)
    coef = profile.f_over_rho(fv) * profile.dchi_eps * np.einsum("a...,a...->...", profile.drho, Wv)
    U = np.einsum("ab...,b...->a...", m.g_inv, profile.drho * coef)
    return project(U, m)


def smoothed_normal_op_311(f, W, m: MetricData, profile: CollarProfile) -> np.ndarray:
    """The defining form: -chi_eps d_a(...) + d_a q with the matching Dirichlet solve."""
    from .elliptic import div
    fv, Wv = values_of(f), values_of(W)
    h = profile.f_over_rho(fv) * np.einsum("a...,a...->...", profile.drho, Wv)
    U = -profile.chi_eps * metric_gradient(h, m)
    return project(U, m)


def mult_op_projected(beta, W, m: MetricData) -> np.ndarray:
    """P(g^{ab} beta_bc W^c); beta given as a (2, 2, ...) array or a TwoForm."""
    from .fields import TwoForm
    if isinstance(beta, TwoForm):
        B = beta.matrix()
    else:
        B = np.asarray(beta, dtype=float)
        if B.shape == m.grid.shape:
            z = np.zeros_like(B)
            B = np.array([[z, B], [-B, z]])
    low = np.einsum("bc...,c...->b...", B, values_of(W))
    return project(np.einsum("ab...,b...->a...", m.g_inv, low), m)


class OperatorHandle:
    """A linear operator on vector fields with optional dense assembly."""

    def __init__(self, apply: Callable[[np.ndarray], np.ndarray], grid: DiskGrid, label: str = ""):
        self._apply = apply
        self.grid = grid
        self.label = label
        self._dense = None

    def __call__(self, W: np.ndarray) -> np.ndarray:
        return self._apply(np.asarray(W, dtype=float))

    apply = __call__

    def dense(self) -> np.ndarray:
        g = self.grid
        if g.size > 48 * 96:
            raise ValueError("dense assembly capped at 48x96")
        if self._dense is None:
            n = 2 * g.size
            cols = []
            e = np.zeros(n)
            for j in range(n):
                e[j] = 1.0
                cols.append(self(e.reshape((2,) + g.shape)).ravel())
                e[j] = 0.0
            self._dense = np.array(cols).T
        return self._dense

    def galerkin(self, basis: Sequence[np.ndarray], m: MetricData) -> tuple[np.ndarray, np.ndarray]:
        """(<B_i, A B_j>, <B_i, B_j>) on a list of fields."""
        AB = [self(b) for b in basis]
        n = len(basis)
        M = np.empty((n, n))
        G = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                M[i, j] = inner_product(basis[i], AB[j], m)
                G[i, j] = inner_product(basis[i], basis[j], m)
        return M, G


def normal_op_handle(f: np.ndarray, m: MetricData) -> OperatorHandle:
    return OperatorHandle(lambda W: normal_op(f, W, m), m.grid, "A_f")


def smoothed_op_handle(f: np.ndarray, m: MetricData, profile: CollarProfile) -> OperatorHandle:
    return OperatorHandle(lambda W: smoothed_normal_op(f, W, m, profile), m.grid, "A_f^eps")


def stream_field(psi: np.ndarray, m: MetricData) -> np.ndarray:
    """kappa^{-1} eps^{ab} d_b psi, divergence free for any psi."""
    d = m.grid.grad(psi)
    return np.array([d[1], -d[0]]) / m.kappa


def divfree_basis(m: MetricData, degree: int = 6) -> list[np.ndarray]:
    """Stream-function fields from monomials psi = y1^i y2^j, 1 <= i + j <= degree."""
    y1, y2 = m.grid.y
    out = []
    for n in range(1, degree + 1):
        for i in range(n + 1):
            out.append(stream_field(y1 ** i * y2 ** (n - i), m))
    return out


def subspace_spectrum(op: OperatorHandle, m: MetricData, basis: Sequence[np.ndarray]) -> dict:
    """Symmetry defect and generalized eigenvalues of the Galerkin pencil."""
    M, G = op.galerkin(basis, m)
    asym = np.abs(M - M.T).max() / max(np.abs(M).max(), 1e-300)
    Ms = 0.5 * (M + M.T)
    # orthonormalize the basis in the Gram metric to avoid an ill-posed pencil
    w, V = np.linalg.eigh(G)
    keep = w > 1e-12 * w.max()
    T = V[:, keep] / np.sqrt(w[keep])
    ev = np.linalg.eigvalsh(T.T @ Ms @ T)
    return {"asymmetry": float(asym), "eigenvalues": ev, "min_eig": float(ev.min()),
            "matrix": M, "gram": G}


def base_energy(W, Wdot, m: MetricData, A: OperatorHandle) -> float:
    """<Wdot, Wdot> + <W, (A + I) W>."""
    Wv, Wd = values_of(W), values_of(Wdot)
    aw = inner_product(Wv, A(Wv), m)
    scale = max(inner_product(Wv, Wv, m), 1.0)
    if aw < -1e-8 * scale:
        raise NegativeEnergy(f"<W, AW> = {aw:.3e}")
    return float(inner_product(Wd, Wd, m) + aw + inner_product(Wv, Wv, m))


def energy_rate_probe(times: Sequence[float], metrics: Sequence[MetricData], Ws, Wdots, Hs,
                      ops: Sequence[OperatorHandle], p_paths: Sequence[np.ndarray],
                      profile: Optional[CollarProfile] = None) -> dict:
    """Check |dE0/dt| <= sqrt(E0) (2 ||H|| + c sqrt(E0)) along a sampled path.

    c = ||pdot / p||_inf + ||Dt g - sigma_dot g||_inf + 2, with pdot/p read in the
    collar form (pdot / rho) / (p / rho).
    """
    t = np.asarray(times, dtype=float)
    E = np.array([base_energy(W, Wd, m, A) for W, Wd, m, A in zip(Ws, Wdots, metrics, ops)])
    dE = np.gradient(E, t, edge_order=2)
    Hn = np.array([np.sqrt(max(inner_product(H, H, m), 0.0)) for H, m in zip(Hs, metrics)])
    ps = np.asarray(p_paths)
    pdot = np.gradient(ps, t, axis=0, edge_order=2)
    grid = metrics[0].grid
    prof = profile or CollarProfile(grid, 0.5)
    ratios = []
    for k in range(len(t)):
        pr = prof.f_over_rho(ps[k])
        pdr = prof.f_over_rho(pdot[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(np.abs(pr) > 1e-12, pdr / pr, 0.0)
        ratios.append(np.abs(q).max())
    gch = max(np.abs(m.check_g).max() if m.gdot is not None else 0.0 for m in metrics)
    c = float(max(ratios) + gch + 2.0)
    bound = np.sqrt(np.maximum(E, 0)) * (2 * Hn + c * np.sqrt(np.maximum(E, 0)))
    margin = bound - np.abs(dE)
    return {"t": t, "E": E, "dE": dE, "bound": bound, "c": c,
            "holds": bool(np.all(margin >= -1e-9 * max(1.0, np.abs(E).max()))),
            "min_margin": float(margin.min())}
