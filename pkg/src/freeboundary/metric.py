"""Coordinate states, trajectories and the metric they induce on the disk."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import SingularJacobian
from .grid import DiskGrid


@dataclass
class CoordinateState:
    """Eulerian positions x(y) with optional velocity V = D_t x and acceleration A."""
    grid: DiskGrid
    x: np.ndarray
    V: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "V", "A"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (2,) + self.grid.shape:
                    raise ValueError(f"{name} has shape {v.shape}")
                setattr(self, name, v)

    @classmethod
    def identity(cls, grid: DiskGrid) -> "CoordinateState":
        z = np.zeros((2,) + grid.shape)
        return cls(grid, grid.y.copy(), z.copy(), z.copy())

    def boundary_curve(self) -> np.ndarray:
        return self.x[:, -1, :]


def _jac(grid: DiskGrid, u: np.ndarray) -> np.ndarray:
    """J[i, a] = d_a u^i."""
    return np.stack([grid.grad(u[0]), grid.grad(u[1])])


def inv2(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det
    return inv, det


@dataclass
class MetricData:
    grid: DiskGrid
    g: np.ndarray
    g_inv: np.ndarray
    kappa: np.ndarray
    sigma: np.ndarray
    J: np.ndarray                     # d_a x^i, indexed [i, a]
    Jinv: np.ndarray                  # dy^a/dx^i, indexed [a, i]
    gdot: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    sigma_dot: Optional[np.ndarray] = None
    sigma_ddot: Optional[np.ndarray] = None
    omega_dot: Optional[np.ndarray] = None
    g_ddot: Optional[np.ndarray] = None
    dV: Optional[np.ndarray] = None   # d_a V^i
    dA: Optional[np.ndarray] = None
    state: Optional[CoordinateState] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def flat(cls, grid: DiskGrid) -> "MetricData":
        m = metric_from_state(CoordinateState.identity(grid), grid)
        I = np.eye(2)[:, :, None, None] + np.zeros((2, 2) + grid.shape)
        m.g, m.g_inv, m.J, m.Jinv = I.copy(), I.copy(), I.copy(), I.copy()
        m.kappa, m.sigma = np.ones(grid.shape), np.zeros(grid.shape)
        m._cache["flat"] = True
        return m

    @property
    def is_flat(self) -> bool:
        if "flat" not in self._cache:
            I = np.eye(2)[:, :, None, None]
            self._cache["flat"] = bool(np.abs(self.g - I).max() < 1e-10)
        return self._cache["flat"]

    def eulerian_grad(self, u: np.ndarray) -> np.ndarray:
        """d_i u = (dy^a/dx^i) d_a u for scalar u (leading axis i)."""
        du = self.grid.grad(u)
        return np.einsum("ai...,a...->i...", self.Jinv, du)

    def eulerian_jac(self, U: np.ndarray) -> np.ndarray:
        """(d_k U^i) indexed [i, k] for Eulerian-component fields."""
        return np.einsum("ia...,ak...->ik...", _jac(self.grid, U), self.Jinv)

    @property
    def check_g(self) -> np.ndarray:
        """D_t g - sigma_dot g."""
        return self.gdot - self.sigma_dot * self.g

    @property
    def check_g_ddot(self) -> np.ndarray:
        return (self.g_ddot - 2.0 * self.sigma_dot * self.gdot
                + (self.sigma_dot ** 2 - self.sigma_ddot) * self.g)

    def c1(self) -> float:
        """Coordinate constant sup sqrt(|dx/dy|^2 + |dy/dx|^2)."""
        return float(np.sqrt((self.J ** 2).sum(axis=(0, 1)) + (self.Jinv ** 2).sum(axis=(0, 1))).max())


def metric_from_state(state: CoordinateState, grid: Optional[DiskGrid] = None) -> MetricData:
    grid = grid or state.grid
    J = _jac(grid, state.x)
    Jinv, det = inv2(J)
    if np.abs(det).min() < 1e-10:
        raise SingularJacobian(f"min |det dx/dy| = {np.abs(det).min():.3e}")
    g = np.einsum("ia...,ib...->ab...", J, J)
    g_inv = np.einsum("ai...,bi...->ab...", Jinv, Jinv)
    m = MetricData(grid, g, g_inv, det, np.log(det), J, Jinv, state=state)
    if state.V is not None:
        dV = _jac(grid, state.V)
        m.dV = dV
        m.gdot = np.einsum("ia...,ib...->ab...", J, dV)
        m.gdot = m.gdot + np.swapaxes(m.gdot, 0, 1)
        w = np.einsum("ia...,ib...->ab...", dV, J)
        m.omega = w - np.swapaxes(w, 0, 1)
        eV = np.einsum("ia...,ak...->ik...", dV, Jinv)
        m.sigma_dot = eV[0, 0] + eV[1, 1]
        if state.A is not None:
            dA = _jac(grid, state.A)
            m.dA = dA
            eA = np.einsum("ia...,ak...->ik...", dA, Jinv)
            m.sigma_ddot = eA[0, 0] + eA[1, 1] - np.einsum("ik...,ki...->...", eV, eV)
            wa = np.einsum("ia...,ib...->ab...", dA, J)
            m.omega_dot = wa - np.swapaxes(wa, 0, 1)
            m.g_ddot = wa + np.swapaxes(wa, 0, 1) + 2.0 * np.einsum("ia...,ib...->ab...", dV, dV)
    return m


# -- trajectories ----------------------------------------------------------------

class Trajectory:
    """Time-indexed coordinate states.

    Analytic mode: ``path(t)`` returns (x, V, A) exactly.  Sampled mode: only x
    is stored and V, A come from centred differences (one-sided second order
    at the ends).
    """

    def __init__(self, grid: DiskGrid, times: Sequence[float], states: list[CoordinateState],
                 path: Optional[Callable] = None):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing")
        self.states = states
        self.path = path
        self._metrics: dict[int, MetricData] = {}

    @property
    def analytic(self) -> bool:
        return self.path is not None

    @classmethod
    def from_path(cls, grid: DiskGrid, path: Callable, times: Sequence[float]) -> "Trajectory":
        states = [CoordinateState(grid, *path(t), t=t) for t in times]
        return cls(grid, times, states, path)

    @classmethod
    def from_samples(cls, grid: DiskGrid, times: Sequence[float], xs: Sequence[np.ndarray]) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        dt = np.diff(times)
        if not np.allclose(dt, dt[0], rtol=1e-12, atol=0):
            raise ValueError("sampled trajectories need a uniform time step")
        h = dt[0]
        X = np.asarray(xs, dtype=float)
        V = np.gradient(X, h, axis=0, edge_order=2)
        A = np.empty_like(X)
        A[1:-1] = (X[2:] - 2 * X[1:-1] + X[:-2]) / h ** 2
        if len(X) >= 4:
            A[0] = (2 * X[0] - 5 * X[1] + 4 * X[2] - X[3]) / h ** 2
            A[-1] = (2 * X[-1] - 5 * X[-2] + 4 * X[-3] - X[-4]) / h ** 2
        else:
            A[0], A[-1] = A[1], A[-2]
        states = [CoordinateState(grid, X[k], V[k], A[k], t=t) for k, t in enumerate(times)]
        return cls(grid, times, states)

    @classmethod
    def static(cls, grid: DiskGrid, times: Sequence[float]) -> "Trajectory":
        def path(t):
            z = np.zeros((2,) + grid.shape)
            return grid.y.copy(), z, z.copy()
        return cls.from_path(grid, path, times)

    def metric(self, k: int) -> MetricData:
        if k not in self._metrics:
            self._metrics[k] = metric_from_state(self.states[k], self.grid)
        return self._metrics[k]

    def state_at(self, t: float) -> CoordinateState:
        if self.path is None:
            raise ValueError("state_at needs an analytic trajectory")
        return CoordinateState(self.grid, *self.path(t), t=t)

    def __len__(self) -> int:
        return len(self.times)


# -- analytic paths used throughout the tests and CLI -----------------------------

def rotation_path(grid: DiskGrid, omega: float = 1.0) -> Callable:
    y1, y2 = grid.y

    def path(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        x = np.array([c * y1 - s * y2, s * y1 + c * y2])
        V = omega * np.array([-x[1], x[0]])
        A = -omega ** 2 * x
        return x, V, A
    return path


def strain_path(grid: DiskGrid, rate: float = 1.0) -> Callable:
    """x = (e^{rt} y1, e^{-rt} y2): velocity (r x1, -r x2), volume preserving."""
    y1, y2 = grid.y

    def path(t):
        a, b = np.exp(rate * t), np.exp(-rate * t)
        x = np.array([a * y1, b * y2])
        V = rate * np.array([x[0], -x[1]])
        A = rate ** 2 * x
        return x, V, A
    return path


def shear_path(grid: DiskGrid) -> Callable:
    y1, y2 = grid.y

    def path(t):
        x = np.array([y1 + t * y2, y2])
        V = np.array([y2, 0 * y2])
        return x, V, np.zeros_like(x)
    return path


def polynomial_path(grid: DiskGrid, coeffs: Sequence[np.ndarray]) -> Callable:
    """x = y + sum_k t^k c_k(y) for k = 1, 2, ...  (coeffs[k-1] = c_k)."""
    coeffs = [np.asarray(c, dtype=float) for c in coeffs]

    def path(t):
        x = grid.y.copy()
        V = np.zeros_like(x)
        A = np.zeros_like(x)
        for k, c in enumerate(coeffs, start=1):
            x = x + t ** k * c
            V = V + k * t ** (k - 1) * c
            if k >= 2:
                A = A + k * (k - 1) * t ** (k - 2) * c
        return x, V, A
    return path
