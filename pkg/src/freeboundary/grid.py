"""Polar collocation grid on the unit disk.

Radial direction: the positive half of a Chebyshev-Lobatto grid on the
diameter [-1, 1] with an even number of points, so no node sits at the
origin.  Values at negative radius are read off the opposite ray,
u(-r, theta) = u(r, theta + pi), which is how the origin is handled.
Angular direction: equispaced Fourier collocation.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ResolutionExceeded


def cheb(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto points x_j = cos(j pi / N) and differentiation matrix."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _radial_quadrature(n_r: int) -> np.ndarray:
    """Weights w_i with sum w_i p(r_i^2) = int_0^1 p(r^2) r dr, deg p < n_r.

    In s = r^2 the nodes are Chebyshev-like, so the moment system is solved in
    the Chebyshev basis of s where it is well conditioned.
    """
    N = 2 * n_r - 1
    j = np.arange(n_r)[::-1]
    s = 0.5 * (1.0 + np.cos(2.0 * np.pi * j / N))
    k = np.arange(n_r)
    V = np.cos(k[:, None] * np.arccos(2.0 * s[None, :] - 1.0))
    mom = np.zeros(n_r)
    even = k % 2 == 0
    mom[even] = 0.5 / (1.0 - k[even] ** 2)
    return np.linalg.solve(V, mom)


class DiskGrid:
    """Tensor grid (r_i, theta_j) on the closed unit disk.

    Fields are arrays of shape (n_r, n_theta); vector fields carry a leading
    component axis of length 2 (Cartesian components in y).
    """

    dim = 2

    def __init__(self, n_r: int, n_theta: int):
        if n_r < 8:
            raise ValueError("n_r must be >= 8")
        if n_theta < 16 or n_theta % 2:
            raise ValueError("n_theta must be an even integer >= 16")
        self.n_r = int(n_r)
        self.n_theta = int(n_theta)
        N = 2 * self.n_r - 1
        x, D = cheb(N)
        D2 = D @ D
        pos = np.arange(self.n_r)[::-1]           # increasing radius
        neg = (N - np.arange(self.n_r))[::-1]     # mirror of each positive node
        self.r = x[pos].copy()
        self._A = D[np.ix_(pos, pos)]
        self._B = D[np.ix_(pos, neg)]
        self._A2 = D2[np.ix_(pos, pos)]
        self._B2 = D2[np.ix_(pos, neg)]
        self.theta = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        m = np.fft.rfftfreq(self.n_theta, 1.0 / self.n_theta)
        self._ik = 1j * m
        self._ik[-1] = 0.0                        # Nyquist mode: odd derivative vanishes
        self.R, self.TH = np.meshgrid(self.r, self.theta, indexing="ij")
        self.cos = np.cos(self.TH)
        self.sin = np.sin(self.TH)
        self.y = np.stack([self.R * self.cos, self.R * self.sin])
        wr = _radial_quadrature(self.n_r)
        self.weights = np.outer(wr, np.full(self.n_theta, 2.0 * np.pi / self.n_theta))

    # -- bookkeeping -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def radial_nodes(self) -> np.ndarray:
        return self.r

    @property
    def quadrature_weights(self) -> np.ndarray:
        return self.weights

    @property
    def boundary(self) -> np.ndarray:
        """Boolean mask of the r = 1 ring."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[-1] = True
        return mask

    def __repr__(self) -> str:
        return f"DiskGrid({self.n_r}, {self.n_theta})"

    def __eq__(self, other) -> bool:
        return isinstance(other, DiskGrid) and other.shape == self.shape

    def __hash__(self) -> int:
        return hash(self.shape)

    def derivative_budget(self) -> int:
        """Highest derivative order trusted for norms at this resolution."""
        return 4 if self.n_r >= 16 else 2

    def check_order(self, k: float) -> None:
        if k > self.derivative_budget():
            raise ResolutionExceeded(f"order {k} exceeds budget {self.derivative_budget()} on {self}")

    # -- differentiation ----------------------------------------------------
    def flip(self, u: np.ndarray) -> np.ndarray:
        """u(r, theta + pi)."""
        return np.roll(u, -self.n_theta // 2, axis=-1)

    def dr(self, u: np.ndarray) -> np.ndarray:
        return self._A @ u + self._B @ self.flip(u)

    def dth(self, u: np.ndarray) -> np.ndarray:
        return np.fft.irfft(self._ik * np.fft.rfft(u, axis=-1), n=self.n_theta, axis=-1)

    def d1(self, u: np.ndarray) -> np.ndarray:
        return self.cos * self.dr(u) - self.sin / self.R * self.dth(u)

    def d2(self, u: np.ndarray) -> np.ndarray:
        return self.sin * self.dr(u) + self.cos / self.R * self.dth(u)

    def grad(self, u: np.ndarray) -> np.ndarray:
        """Cartesian partials d_a u, stacked on a new leading axis."""
        ur = self.dr(u)
        ut = self.dth(u) / self.R
        return np.stack([self.cos * ur - self.sin * ut, self.sin * ur + self.cos * ut])

    def partial(self, u: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        """Mixed Cartesian derivative; alpha lists the axes, e.g. (0, 0, 1)."""
        for a in alpha:
            u = self.d1(u) if a == 0 else self.d2(u)
        return u

    def mode_radial(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """First and second radial derivative matrices for angular mode m."""
        s = (-1.0) ** m
        return self._A + s * self._B, self._A2 + s * self._B2

    # -- sparse operator matrices (flattened r-major ordering) -------------
    @cached_property
    def _flip_mat(self) -> sp.csr_matrix:
        n = self.n_theta
        return sp.csr_matrix(np.roll(np.eye(n), n // 2, axis=1))

    @cached_property
    def dth_matrix_1d(self) -> np.ndarray:
        n = self.n_theta
        h = 2.0 * np.pi / n
        k = np.arange(n)
        diff = (k[:, None] - k[None, :]) % n
        with np.errstate(divide="ignore"):
            col = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2.0)
        col[diff == 0] = 0.0
        return col

    @cached_property
    def Dr_mat(self) -> sp.csr_matrix:
        It = sp.identity(self.n_theta, format="csr")
        return (sp.kron(self._A, It) + sp.kron(self._B, self._flip_mat)).tocsr()

    @cached_property
    def Dth_mat(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.n_r), self.dth_matrix_1d).tocsr()

    @cached_property
    def D_mats(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        c = sp.diags(self.cos.ravel())
        s = sp.diags(self.sin.ravel())
        ir = sp.diags(1.0 / self.R.ravel())
        D1 = c @ self.Dr_mat - s @ ir @ self.Dth_mat
        D2 = s @ self.Dr_mat + c @ ir @ self.Dth_mat
        return D1.tocsr(), D2.tocsr()

    # -- quadrature ---------------------------------------------------------
    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    # -- interpolation -----------------------------------------------------
    def diameter_values(self, u: np.ndarray) -> np.ndarray:
        """Values along full diameters at the 2 n_r Lobatto points, x descending.

        Returns shape (..., 2 n_r, n_theta): column j is the line through
        theta_j, positive x along theta_j.
        """
        pos = u[..., ::-1, :]
        neg = self.flip(u)
        return np.concatenate([pos, neg], axis=-2)

    @cached_property
    def lobatto(self) -> np.ndarray:
        N = 2 * self.n_r - 1
        return np.cos(np.pi * np.arange(N + 1) / N)

    def radial_interp_matrix(self, x: np.ndarray) -> np.ndarray:
        """Barycentric interpolation rows on the diameter grid, points x in [-1, 1]."""
        xs = self.lobatto
        N = xs.size - 1
        w = (-1.0) ** np.arange(N + 1)
        w[0] *= 0.5
        w[-1] *= 0.5
        x = np.asarray(x, dtype=float)
        diff = x[:, None] - xs[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        diff[exact] = 1.0
        M = w[None, :] / diff
        M /= M.sum(axis=1, keepdims=True)
        rows = exact.any(axis=1)
        if rows.any():
            M[rows] = exact[rows].astype(float)
        return M

    def evaluate(self, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Spectral interpolant of u at Cartesian points pts (shape (2, M))."""
        pts = np.asarray(pts, dtype=float)
        rr = np.hypot(pts[0], pts[1])
        tt = np.arctan2(pts[1], pts[0])
        c = np.fft.rfft(u, axis=-1) / self.n_theta
        m = np.arange(c.shape[-1])
        scale = np.full(m.size, 2.0)
        scale[0] = 1.0
        if self.n_theta % 2 == 0:
            scale[-1] = 1.0
        # angular evaluation per radial node, then radial interpolation on the diameter
        ph = np.exp(1j * np.outer(tt, m))                       # (M, modes)
        vals_pos = np.real((c * scale) @ ph.T)                  # (n_r, M) at angle tt
        ph_n = np.exp(1j * np.outer(tt + np.pi, m))
        vals_neg = np.real((c * scale) @ ph_n.T)
        line = np.concatenate([vals_pos[::-1], vals_neg], axis=0)   # (2n_r, M)
        Imat = self.radial_interp_matrix(rr)
        return np.einsum("mk,km->m", Imat, line)
