"""Radial extension with a moment-condition kernel and the smoothing operators S_theta."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import legendre as leg

from .calculus import holder_norm
from .cutoffs import plateau
from .errors import IllConditionedMoments
from .fields import ScalarField, like, values_of
from .grid import DiskGrid


class ClampWarning(UserWarning):
    """Reflected points fell outside the sampled interval and were clamped."""


# -- the extension kernel ----------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionKernel:
    """psi_1 on [1, Lambda] as a weighted polynomial with nodes and weights.

    psi_1 = w(lam) p(lam) with w = (lam - 1)^p (Lambda - lam)^q and deg p = K, fixed by
    int psi_1 = 1 and int lam^k psi_1 = 0 for 1 <= k <= K.  `weights` already
    include the kernel values, so int f psi_1 = sum weights * f(nodes).
    """
    K: int
    Lambda: float
    nodes: np.ndarray
    weights: np.ndarray
    coeffs: np.ndarray
    powers: tuple = (2, 2)

    def _w(self, lam):
        p, q = self.powers
        return (lam - 1.0) ** p * (self.Lambda - lam) ** q

    def _x(self, lam):
        return 2.0 * (np.asarray(lam, dtype=float) - 1.0) / (self.Lambda - 1.0) - 1.0

    def psi(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        inside = (lam >= 1.0) & (lam <= self.Lambda)
        lc = np.clip(lam, 1.0, self.Lambda)
        return np.where(inside, self._w(lc) * leg.legval(self._x(lc), self.coeffs), 0.0)

    def moments(self, kmax: Optional[int] = None) -> np.ndarray:
        kmax = self.K if kmax is None else kmax
        return np.array([np.sum(self.weights * self.nodes ** k) for k in range(kmax + 1)])

    def moment_residuals(self) -> dict:
        """Defects of the moment conditions.

        `legendre`: int P_k(x(lam)) psi_1 - P_k(x(0)), an equivalent and well conditioned
        form; `monomial`: |int lam^k psi_1 - delta_k0| and the same divided by int lam^k |psi_1|.
        """
        x0 = self._x(0.0)
        xs = self._x(self.nodes)
        E = np.eye(self.K + 1)
        lg = np.array([np.sum(self.weights * leg.legval(xs, E[k])) - leg.legval(x0, E[k])
                       for k in range(self.K + 1)])
        mono = self.moments()
        mono[0] -= 1.0
        scale = np.array([np.sum(np.abs(self.weights) * self.nodes ** k) for k in range(self.K + 1)])
        return {"legendre": np.abs(lg), "monomial": np.abs(mono), "relative": np.abs(mono) / scale}

    def _series(self) -> np.ndarray:
        """psi_1 as a Legendre series in the mapped variable x."""
        half = 0.5 * (self.Lambda - 1.0)
        p, q = self.powers
        # lam - 1 = half (1 + x), Lambda - lam = half (1 - x)
        wt = leg.legmul(leg.legpow([1.0, 1.0], p), leg.legpow([1.0, -1.0], q)) * half ** (p + q)
        return leg.legmul(wt, self.coeffs)

    def tail(self, lam) -> np.ndarray:
        """int_lam^Lambda psi_1, exact for the polynomial density."""
        lam = np.clip(np.asarray(lam, dtype=float), 1.0, self.Lambda)
        F = leg.legint(self._series(), lbnd=1.0)        # antiderivative vanishing at x = 1
        return -0.5 * (self.Lambda - 1.0) * leg.legval(self._x(lam), F)

    def derivative_constant(self, j: int) -> float:
        """int |1 - 2 lam|^j |psi_1|, the factor in sup |d^j Ext_1 f| <= C_j sup |f^(j)|."""
        return float(np.sum(np.abs(self.weights) * np.abs(1.0 - 2.0 * self.nodes) ** j))


def build_moment_kernel(K: int = 7, Lambda: float = 8.0, n_quad: Optional[int] = None,
                        powers: tuple = (2, 2)) -> ExtensionKernel:
    """Solve the finite moment system for psi_1 on [1, Lambda].

    The conditions say int q psi_1 = q(0) for every polynomial q of degree <= K;
    posed in the Legendre basis of the mapped variable the Gram system stays well
    conditioned for moderate K.
    """
    if K < 0 or K > 12:
        raise IllConditionedMoments(f"K={K} outside 0..12")
    if Lambda <= 1.0:
        raise IllConditionedMoments("Lambda must exceed 1")
    n = n_quad or max(64, 4 * K + 32 + sum(powers))
    x, w = leg.leggauss(n)
    lam = 1.0 + 0.5 * (Lambda - 1.0) * (x + 1.0)
    w = w * 0.5 * (Lambda - 1.0)
    wt = (lam - 1.0) ** powers[0] * (Lambda - lam) ** powers[1]
    E = np.eye(K + 1)
    V = np.array([leg.legval(x, E[j]) for j in range(K + 1)])
    G = (V * (w * wt)) @ V.T
    x0 = -1.0 - 2.0 / (Lambda - 1.0)
    rhs = np.array([leg.legval(x0, E[j]) for j in range(K + 1)])
    cond = np.linalg.cond(G)
    if cond > 1e12:
        raise IllConditionedMoments(f"moment system condition {cond:.2e}; try a larger Lambda")
    c = np.linalg.solve(G, rhs)
    psi = wt * (c @ V)
    return ExtensionKernel(K, float(Lambda), lam, w * psi, c, tuple(powers))


# -- one-dimensional extension -------------------------------------------------------------

def _barycentric_matrix(xs: np.ndarray, x: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    d = xs[:, None] - xs[None, :]
    np.fill_diagonal(d, 1.0)
    wb = 1.0 / d.prod(axis=1)
    wb /= np.abs(wb).max()
    diff = x[:, None] - xs[None, :]
    exact = np.abs(diff) < 1e-15
    diff[exact] = 1.0
    M = wb[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    M[rows] = exact[rows].astype(float)
    return M


def _warn_clamp(mass: float, lo: float) -> None:
    if mass > 0:
        warnings.warn(f"reflected points below {lo:g} clamped (kernel mass {mass:.3e})",
                      ClampWarning, stacklevel=3)


def extend_radial(f: Union[Callable, np.ndarray], kernel: ExtensionKernel, r_out,
                  r_samples: Optional[np.ndarray] = None) -> np.ndarray:
    """Ext_1 f at the radii r_out (f itself for r <= 1).

    f is either a callable (evaluated anywhere, so polynomial reproduction is exact)
    or samples on `r_samples` in [lo, 1]; samples are interpolated by the polynomial
    through them, and reflected points below lo take the value at lo.
    """
    r = np.atleast_1d(np.asarray(r_out, dtype=float))
    if callable(f):
        ev, lo = f, -np.inf
    else:
        xs = np.asarray(r_samples, dtype=float)
        vals = np.asarray(f, dtype=float)
        lo = xs.min()

        def ev(p):
            p = np.asarray(p, dtype=float)
            return (_barycentric_matrix(xs, p.ravel()) @ vals).reshape(p.shape)
    out = np.empty_like(r)
    inner = r <= 1.0
    if inner.any():
        out[inner] = ev(r[inner])
    outer = ~inner
    if outer.any():
        ro = r[outer]
        pts = ro[:, None] - 2.0 * kernel.nodes[None, :] * (ro[:, None] - 1.0)
        low = pts < lo
        _warn_clamp(float(np.sum(np.abs(kernel.weights)[None, :] * low)) / max(ro.size, 1), lo)
        pts = np.maximum(pts, lo)
        out[outer] = ev(pts) @ kernel.weights
    return out


def extend_radial_derivative(fj: Callable, kernel: ExtensionKernel, r_out, j: int) -> np.ndarray:
    """d^j/dr^j Ext_1 f for r > 1 from the j-th derivative fj of f (differentiation under the integral)."""
    r = np.atleast_1d(np.asarray(r_out, dtype=float))
    pts = r[:, None] - 2.0 * kernel.nodes[None, :] * (r[:, None] - 1.0)
    return fj(pts) @ (kernel.weights * (1.0 - 2.0 * kernel.nodes) ** j)


def one_sided_jumps(derivs: Sequence[Callable], kernel: ExtensionKernel, delta: float = 0.0) -> np.ndarray:
    """|d^j Ext_1 f (1 + delta) - f^(j)(1)| for the supplied derivatives f, f', f'', ..."""
    return np.array([abs(extend_radial_derivative(fj, kernel, 1.0 + delta, j)[0] - float(fj(np.array([1.0]))[0]))
                     for j, fj in enumerate(derivs)])


def holder_norm_1d(values: np.ndarray, x: np.ndarray, a: float) -> float:
    """Hoelder norm of samples on a 1-D node set (derivatives by the interpolating polynomial)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    k = int(np.floor(a))
    D = _diff_matrix(x)
    dv = v.copy()
    for _ in range(k):
        dv = D @ dv
    total = np.abs(v).max()
    if a == 0:
        return float(total)
    if a == k:
        return float(total + np.abs(dv).max())
    gap = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(gap, np.inf)
    return float(total + (np.abs(dv[:, None] - dv[None, :]) / gap ** (a - k)).max())


def _diff_matrix(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    wb = 1.0 / d.prod(axis=1)
    D = (wb[None, :] / wb[:, None]) / d
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


# -- two-dimensional extension ---------------------------------------------------------------

def chi0(r, order: int = 0):
    return plateau(r, 0.5, 0.75, order)


def chi2(r, order: int = 0):
    return plateau(r, 1.25, 1.5, order)


def _mode_interp(grid: DiskGrid, s: np.ndarray, parity: int) -> np.ndarray:
    """Rows mapping the mode values u_m(r_j) to u_m(s), s in [-1, 1], with u_m(-r) = (-1)^m u_m(r)."""
    n = grid.n_r
    I = grid.radial_interp_matrix(s)
    return I[:, :n][:, ::-1] + parity * I[:, n:]


def _extension_rows(grid: DiskGrid, s: np.ndarray, parity: int, kernel: ExtensionKernel,
                    partition: bool) -> np.ndarray:
    """Rows mapping u_m(r_j) to Ext(u)_m(s) for 0 <= s <= 3/2."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((s.size, grid.n_r))
    inner = s <= 1.0
    if inner.any():
        out[inner] = _mode_interp(grid, s[inner], parity)
    outer = ~inner & (s < 1.5)
    if outer.any():
        so = s[outer]
        pts = so[:, None] - 2.0 * kernel.nodes[None, :] * (so[:, None] - 1.0)
        if partition:
            # chi_1 u vanishes for r <= 1/2, so points below 1/2 contribute nothing
            keep = pts > 0.5
            wts = np.where(keep, kernel.weights[None, :] * (1.0 - chi0(np.maximum(pts, 0.5))), 0.0)
            p = np.clip(pts, 0.5, 1.0)
        else:
            # reflected points leave the diameter for lam > lam*(s); there the value at -1 is used,
            # integrated exactly against psi_1 so the extension stays smooth in s
            lam_star = np.minimum((so + 1.0) / (2.0 * (so - 1.0)), kernel.Lambda)
            xq, wq = leg.leggauss(kernel.nodes.size)
            half = 0.5 * (lam_star - 1.0)
            lam = 1.0 + half[:, None] * (xq[None, :] + 1.0)
            wts = half[:, None] * wq[None, :] * kernel.psi(lam)
            p = np.maximum(so[:, None] - 2.0 * lam * (so[:, None] - 1.0), -1.0)
            tail = kernel.tail(lam_star)
        acc = np.empty((so.size, grid.n_r))
        step = max(1, 4096 // p.shape[1])
        for a in range(0, so.size, step):
            rows = _mode_interp(grid, p[a:a + step].ravel(), parity).reshape(p[a:a + step].shape + (grid.n_r,))
            acc[a:a + step] = np.einsum("pq,pqj->pj", wts[a:a + step], rows)
        if not partition:
            acc += tail[:, None] * _mode_interp(grid, np.array([-1.0]), parity)
        out[outer] = chi2(so)[:, None] * acc
    return out


def extend_field(u, kernel: ExtensionKernel, pts: np.ndarray, partition: bool = False) -> np.ndarray:
    """Ext(u) at Cartesian points pts (2, M) with |pts| <= 3/2.

    partition=True is chi_2 Ext_1(chi_1 u) + chi_0 u on rays from the origin;
    partition=False extends along full diameters (straight lines through the disk,
    so the origin needs no special care) and clamps reflected points at the far end.
    """
    grid = u.grid if hasattr(u, "grid") else None
    if grid is None:
        raise ValueError("extend_field needs a ScalarField (values with a grid)")
    uv = values_of(u)
    pts = np.asarray(pts, dtype=float)
    rr = np.hypot(pts[0], pts[1])
    tt = np.arctan2(pts[1], pts[0])
    c = np.fft.rfft(uv, axis=-1) / grid.n_theta
    ms = np.arange(c.shape[-1])
    scale = np.where((ms == 0) | (2 * ms == grid.n_theta), 1.0, 2.0)
    ext = np.zeros(rr.size, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        for m in ms:
            rows = _extension_rows(grid, rr, (-1) ** m, kernel, partition)
            ext += scale[m] * (rows @ c[:, m]) * np.exp(1j * m * tt)
    return ext.real


# -- mollifier and S_theta ---------------------------------------------------------------

@dataclass(frozen=True)
class RadialMollifier:
    """phi(rho) = (1 - rho^2)^power p(rho^2) on rho <= 1, int phi = 1 over R^2 and vanishing moments
    of order 1..K; odd moments vanish by symmetry, even ones by the choice of p.

    `nodes`/`weights` form a Gauss rule in rho that integrates the moment conditions exactly.
    """
    K: int
    coeffs: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    power: int = 6

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        q = np.minimum(rho, 1.0) ** 2
        poly = sum(c * q ** i for i, c in enumerate(self.coeffs))
        return np.where(rho < 1.0, (1.0 - q) ** self.power * poly, 0.0)

    def moments(self) -> np.ndarray:
        """2 pi int rho^(2k+1) phi drho for k = 0..K//2."""
        return np.array([2 * np.pi * np.sum(self.weights * self.nodes ** (2 * k + 1) * self(self.nodes))
                         for k in range(self.K // 2 + 1)])


def build_mollifier(K: int = 7, n_rho: int = 24, power: int = 6) -> RadialMollifier:
    J = K // 2
    x, w = leg.leggauss(n_rho)
    rho = 0.5 * (x + 1.0)
    w = 0.5 * w
    q = rho ** 2
    bump = (1.0 - q) ** power
    A = np.array([[2 * np.pi * np.sum(w * rho * q ** k * bump * q ** i) for i in range(J + 1)]
                  for k in range(J + 1)])
    rhs = np.zeros(J + 1)
    rhs[0] = 1.0
    return RadialMollifier(K, np.linalg.solve(A, rhs), rho, w, power)


@dataclass
class SmoothingOperator:
    """S_theta u = (phi_theta * Ext u) / (phi_theta * Ext 1) on the disk, modes above floor(theta) removed.

    The denominator is a fixed radial function equal to 1 once the mollifier stays inside
    the plateau of chi_2 (theta >= 4); below that it keeps constants exact.
    """
    grid: DiskGrid
    theta: float
    kernel: ExtensionKernel
    mollifier: RadialMollifier
    partition: bool = False
    normalize: bool = True
    mats: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        self.M = min(int(np.floor(self.theta)), self.grid.n_theta // 2)
        self.mats = _mode_matrices(self.grid, self.theta, self.M, self.kernel, self.mollifier,
                                   self.partition)
        self.denominator = self.mats[0].sum(axis=1)
        if self.normalize:
            if np.abs(self.denominator).min() < 0.25:
                raise ValueError(f"smoothed extension of 1 nearly vanishes at theta={self.theta}")
            self.mats = [A / self.denominator[:, None] for A in self.mats]

    def __call__(self, u):
        uv = values_of(u)
        c = np.fft.rfft(uv, axis=-1)
        out = np.zeros_like(c)
        for m in range(self.M + 1):
            out[:, m] = self.mats[m] @ c[:, m]
        return like(u, np.fft.irfft(out, n=self.grid.n_theta, axis=-1), ScalarField)

    apply = __call__


def _mode_matrices(grid: DiskGrid, theta: float, M: int, kernel: ExtensionKernel,
                   phi: RadialMollifier, partition: bool) -> list:
    """Per-mode radial matrices; the integral runs in polar coordinates about each target."""
    h = 1.0 / theta
    n_b = 2 * M + 32
    beta = 2 * np.pi * np.arange(n_b) / n_b
    rho = h * phi.nodes
    wr = phi.weights * phi.nodes * phi(phi.nodes) * (2 * np.pi / n_b)
    zx = grid.r[:, None, None] + rho[None, :, None] * np.cos(beta)[None, None, :]
    zy = np.broadcast_to(rho[None, :, None] * np.sin(beta)[None, None, :], zx.shape)
    rad = np.hypot(zx, zy).reshape(grid.n_r, -1)
    ang = np.arctan2(zy, zx).reshape(grid.n_r, -1)
    wts = np.broadcast_to(wr[None, :, None], zx.shape).reshape(grid.n_r, -1)
    E = {}
    for par in (1, -1):
        E[par] = _extension_rows(grid, rad.ravel(), par, kernel, partition).reshape(rad.shape + (grid.n_r,))
    return [np.einsum("iq,iqj->ij", wts * np.cos(m * ang), E[(-1) ** m]) for m in range(M + 1)]


_CACHE: dict = {}

# Defaults for S_theta, sized for the Hoelder ladder a, b <= 3: a low-order extension with
# a short reach and a steep far edge keeps the derivative constants of Ext small; the
# stand-alone kernel builder keeps the higher-order default.
SMOOTH_K = 3
SMOOTH_LAMBDA = 4.0
SMOOTH_POWERS = (1, 8)
SMOOTH_BUMP = 10
SMOOTH_N_RHO = 96


def smoothing_operator(grid: DiskGrid, theta: float, K: int = SMOOTH_K, Lambda: float = SMOOTH_LAMBDA,
                       partition: bool = False, normalize: bool = True, K_moll: Optional[int] = None,
                       n_rho: int = SMOOTH_N_RHO, powers: tuple = SMOOTH_POWERS,
                       bump: int = SMOOTH_BUMP) -> SmoothingOperator:
    K_moll = K if K_moll is None else K_moll
    key = (grid.shape, float(theta), K, float(Lambda), partition, normalize, K_moll, n_rho,
           tuple(powers), bump)
    if key not in _CACHE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            _CACHE[key] = SmoothingOperator(grid, theta, build_moment_kernel(K, Lambda, powers=powers),
                                            build_mollifier(K_moll, n_rho, bump), partition, normalize)
    return _CACHE[key]


def smooth(u, theta: float, grid: Optional[DiskGrid] = None, **options):
    grid = grid or u.grid
    return smoothing_operator(grid, theta, **options)(u)


# -- empirical verification of the smoothing estimates ------------------------------------------

ESTIMATES = ("bounded", "gain", "remainder", "increment")


def standard_corpus(grid: DiskGrid) -> dict:
    """Smooth, Hoelder-rough and oscillatory samples."""
    y1, y2 = grid.y
    return {
        "smooth": np.exp(y1) * np.cos(2 * y2) + y1 * y2 ** 2,
        "rough": np.abs(y1 - 0.3) ** 2.5 + np.abs(y2 + 0.1) ** 1.5,
        "oscillatory": np.sin(6 * y1 + 4 * y2) * (1 + 0.5 * y2),
    }


@dataclass
class SmoothingReport:
    constants: dict            # estimate label -> max ratio
    rows: list                 # (estimate, sample, theta, a, b, ratio)

    def csv(self) -> str:
        lines = ["estimate,sample,theta,a,b,ratio"]
        for e, name, th, a, b, r in self.rows:
            lines.append(f"{e},{name},{th:g},{a:g},{b:g},{r:.6e}")
        return "\n".join(lines) + "\n"


def verify_smoothing(grid: DiskGrid, corpus: Optional[dict] = None, a_list: Sequence[float] = (0, 1, 2, 3),
                     b_list: Sequence[float] = (0, 1, 2, 3), thetas: Sequence[float] = (2, 4, 8, 16, 32, 64),
                     **options) -> SmoothingReport:
    """Fitted constants: max over corpus x theta x (a, b) of LHS / (theta power x RHS).

    bounded:   ||S u||_a <= C ||u||_b, a <= b
    gain:      ||S u||_a <= C theta^(a-b) ||u||_b, a >= b
    remainder: ||(I - S) u||_a <= C theta^(a-b) ||u||_b, a <= b
    increment: ||(S_2theta - S) u||_a <= C theta^(a-b) ||u||_b
    """
    if max(list(a_list) + list(b_list)) > 4:
        raise ValueError("a, b <= 4")
    corpus = standard_corpus(grid) if corpus is None else corpus
    rows = []

    def hn(v, a):
        return holder_norm(v, a, grid)

    for name, u in corpus.items():
        u = np.asarray(values_of(u), dtype=float)
        nb = {b: hn(u, b) for b in b_list}
        for th in thetas:
            Su = values_of(smoothing_operator(grid, th, **options)(u))
            S2u = values_of(smoothing_operator(grid, 2 * th, **options)(u))
            na = {a: (hn(Su, a), hn(u - Su, a), hn(S2u - Su, a)) for a in a_list}
            for a in a_list:
                for b in b_list:
                    if nb[b] == 0:
                        continue
                    s_a, r_a, d_a = na[a]
                    p = th ** (a - b)
                    if a <= b:
                        rows.append(("bounded", name, th, a, b, s_a / nb[b]))
                        rows.append(("remainder", name, th, a, b, r_a / (p * nb[b])))
                    if a >= b:
                        rows.append(("gain", name, th, a, b, s_a / (p * nb[b])))
                    rows.append(("increment", name, th, a, b, d_a / (p * nb[b])))
    consts = {e: max((r[5] for r in rows if r[0] == e), default=0.0) for e in ESTIMATES}
    return SmoothingReport(consts, rows)
