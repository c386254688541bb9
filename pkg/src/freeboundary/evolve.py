"""Time stepping of the smoothed modified linearized equation and the solves built on it."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .calculus import inner_product, norm, sobolev_norm
from .elliptic import div, metric_gradient, pressure_solve, project, solver_for
from .errors import CflViolation, EnergyBlowup, MissingTrajectory, NoContraction
from .frame import FrameField, lie_derivative, modified_lie_hat, rotation_field
from .grid import DiskGrid
from .linearization import B0_apply, B1_apply, B3_apply, _ehess, modified_linearized
from .metric import CoordinateState, MetricData, Trajectory, metric_from_state
from .normal_op import CollarProfile, smoothed_normal_op

Forcing = Optional[Callable[[float], np.ndarray]]


@dataclass
class EvolutionConfig:
    dt: float = 0.01
    T: float = 0.5
    epsilon: float = 0.25
    integrator: str = "rk4"
    energy_log: bool = True
    c_cfl: float = 0.5
    operator: Optional[Callable] = None       # (W, m, t) -> vector; replaces A^eps when given
    ladder: Sequence[str] = ("Dt", "rotation")
    blowup: float = 1e6
    div_tol: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0 or self.epsilon <= 0:
            raise ValueError("dt, T and epsilon must be positive")
        if self.integrator != "rk4":
            raise ValueError("only the classical four-stage Runge-Kutta scheme is provided")
        if self.dt > self.c_cfl * self.epsilon * (1 + 1e-12):
            raise CflViolation(f"dt={self.dt} exceeds {self.c_cfl}*eps={self.c_cfl * self.epsilon}")

    @property
    def n_steps(self) -> int:
        # the horizon is rounded up to a whole number of steps
        return int(np.ceil(self.T / self.dt - 1e-9))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


class Background:
    """An analytic coordinate path x(t) with cached metrics, pressures and the collar profile."""

    def __init__(self, grid: DiskGrid, path: Callable, epsilon: Optional[float] = None,
                 cache_size: int = 48):
        self.grid = grid
        self.path = path
        self.cache_size = cache_size
        self._metrics: OrderedDict = OrderedDict()
        self.profile = CollarProfile(grid, epsilon) if epsilon is not None else None

    @classmethod
    def from_trajectory(cls, traj: Trajectory, epsilon: Optional[float] = None) -> "Background":
        if traj.path is None:
            raise MissingTrajectory("time stepping needs an analytic trajectory (state at any t)")
        return cls(traj.grid, traj.path, epsilon)

    @classmethod
    def static(cls, grid: DiskGrid, epsilon: Optional[float] = None) -> "Background":
        z = np.zeros((2,) + grid.shape)

        def path(t):
            return grid.y.copy(), z.copy(), z.copy()
        bg = cls(grid, path, epsilon)
        bg._static = MetricData.flat(grid)
        bg._static.state = CoordinateState(grid, *path(0.0))
        m = bg._static
        zz = np.zeros((2, 2) + grid.shape)
        m.dV, m.dA, m.gdot, m.omega, m.omega_dot, m.g_ddot = (zz.copy() for _ in range(6))
        m.sigma_dot, m.sigma_ddot = np.zeros(grid.shape), np.zeros(grid.shape)
        return bg

    def state(self, t: float) -> CoordinateState:
        return CoordinateState(self.grid, *self.path(t), t=t)

    def metric(self, t: float) -> MetricData:
        if hasattr(self, "_static"):
            return self._static
        key = round(float(t), 12)
        if key in self._metrics:
            self._metrics.move_to_end(key)
        else:
            # each entry carries a dense factorization, so keep the cache small (LRU)
            if len(self._metrics) >= self.cache_size:
                self._metrics.popitem(last=False)
            self._metrics[key] = metric_from_state(self.state(t))
        return self._metrics[key]

    def pressure(self, t: float) -> np.ndarray:
        return pressure_solve(self.metric(t))

    def with_epsilon(self, epsilon: float) -> "Background":
        if self.profile is None or self.profile.epsilon != epsilon:
            self.profile = CollarProfile(self.grid, epsilon)
        return self


def sampled_forcing(times: np.ndarray, values: np.ndarray) -> Callable[[float], np.ndarray]:
    """Cubic spline in time through sampled fields (used for derived right-hand sides)."""
    if np.allclose(values, 0.0):
        z = np.zeros(values.shape[1:])
        return lambda t: z
    cs = CubicSpline(times, values, axis=0)
    return lambda t: cs(t)


def _fd_time_derivative(Y: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite differences along axis 0 (one-sided at the ends)."""
    n = len(Y)
    out = np.empty_like(Y)
    if n < 5:
        return np.gradient(Y, dt, axis=0)
    out[2:-2] = (Y[:-4] - 8 * Y[1:-3] + 8 * Y[3:-1] - Y[4:]) / (12 * dt)
    c = np.array([-25, 48, -36, 16, -3]) / (12 * dt)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * dt)
    out[0] = np.tensordot(c, Y[:5], axes=1)
    out[1] = np.tensordot(c1, Y[:5], axes=1)
    out[-1] = -np.tensordot(c, Y[::-1][:5], axes=1)
    out[-2] = -np.tensordot(c1, Y[::-1][:5], axes=1)
    return out


# -- the smoothed equation ------------------------------------------------------------------

def smoothed_rhs(bg: Background, cfg: EvolutionConfig, F: Forcing):
    """(W, Z) -> (D_t W, D_t Z) with Z = D^_t W and Zdot = B0 W + B1 Z - A^eps W + F."""
    def rhs(t, W, Z):
        m = bg.metric(t)
        if cfg.operator is not None:
            AW = cfg.operator(W, m, t)
        else:
            AW = smoothed_normal_op(bg.pressure(t), W, m, bg.profile)
        solver = solver_for(m)
        B0W, _ = B0_apply(W, m, solver)
        B1Z, _ = B1_apply(Z, m, solver)
        Zd = B0W + B1Z - AW
        if F is not None:
            Zd = Zd + F(t)
        sd = m.sigma_dot
        return Z - sd * W, Zd - sd * Z, Zd, AW
    return rhs


@dataclass
class EnergyLadder:
    times: list = field(default_factory=list)
    E: dict = field(default_factory=dict)         # label -> list of E_I
    D: dict = field(default_factory=dict)         # label -> list of D_I
    H_norm: list = field(default_factory=list)
    dE0: list = field(default_factory=list)       # dE0/dt along the solution, by a tangent difference

    def level(self, r: int) -> np.ndarray:
        """E_r = sum over |I| <= r of sqrt(E_I)."""
        labels = [k for k in self.E if (k == "" if r == 0 else True)]
        return np.sum([np.sqrt(np.maximum(self.E[k], 0.0)) for k in labels], axis=0)

    @property
    def E0(self) -> np.ndarray:
        return np.asarray(self.E[""])


@dataclass
class EvolutionResult:
    times: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    Zdot: np.ndarray
    ladder: EnergyLadder
    div_max: np.ndarray
    rows: list

    def csv(self) -> str:
        lines = ["t,E0,E1,divW_max,residual"]
        for r in self.rows:
            lines.append(",".join(f"{v:.10e}" for v in r))
        return "\n".join(lines) + "\n"


def _energy(W, Z, AW, m):
    return inner_product(Z, Z, m) + inner_product(W, AW, m) + inner_product(W, W, m)


def _ladder_fields(names) -> dict:
    out = {}
    for n in names:
        if n == "rotation":
            out[n] = rotation_field()
        elif n == "radial":
            from .frame import radial_field
            out[n] = radial_field()
        elif n != "Dt":
            raise ValueError(f"unknown ladder field {n}")
    return out


def _A_commutator(T: FrameField, W, m, Aop) -> np.ndarray:
    """A_T W = P(g^{-1}(L_T(g A W) - g A(L^_T W)))."""
    g = m.grid
    low = np.einsum("ab...,b...->a...", m.g, Aop(W))
    LW = modified_lie_hat(T, W, m)
    low2 = np.einsum("ab...,b...->a...", m.g, Aop(LW))
    d = lie_derivative(T, low, g, "oneform") - low2
    return project(np.einsum("ab...,b...->a...", m.g_inv, d), m)


def evolve_smoothed(bg: Background, F: Forcing, cfg: EvolutionConfig,
                    check_divergence: bool = True) -> EvolutionResult:
    """Integrate L_1^eps W = F from vanishing data with classical RK4."""
    if cfg.operator is None:
        bg.with_epsilon(cfg.epsilon)
    grid = bg.grid
    times = cfg.times
    dt = cfg.dt
    if check_divergence and F is not None:
        for t in (times[0], times[len(times) // 2], times[-1]):
            m = bg.metric(t)
            Fv = F(t)
            dv = np.abs(div(Fv, m)).max()
            if dv > cfg.div_tol * max(1.0, np.abs(Fv).max()):
                raise ValueError(f"forcing is not divergence free (max div {dv:.2e} at t={t})")
    rhs = smoothed_rhs(bg, cfg, F)
    W = np.zeros((2,) + grid.shape)
    Z = np.zeros_like(W)
    Ws, Zs, Zds, divs = [], [], [], []
    ladder = EnergyLadder()
    fields = _ladder_fields(cfg.ladder)
    ladder.E[""] = []
    for k in cfg.ladder:
        ladder.E[k] = []
    for k in fields:
        ladder.D[k] = []
    rows = []
    scale = 0.0

    def log(t, W, Z):
        nonlocal scale
        m = bg.metric(t)
        dW, dZ, Zd, AW = rhs(t, W, Z)
        Ws.append(W.copy())
        Zs.append(Z.copy())
        Zds.append(Zd.copy())
        # interior collocation nodes: the discrete projection does not constrain the boundary ring
        dvm = float(np.abs(div(W, m)[:-1]).max())
        divs.append(dvm)
        if not cfg.energy_log:
            rows.append((t, np.nan, np.nan, dvm, np.nan))
            return
        Aop = (lambda U: cfg.operator(U, m, t)) if cfg.operator is not None else \
            (lambda U: smoothed_normal_op(bg.pressure(t), U, m, bg.profile))
        E0 = _energy(W, Z, AW, m)
        ladder.times.append(t)
        ladder.E[""].append(E0)
        H = Zd + AW
        ladder.H_norm.append(norm(H, m))
        ladder.dE0.append(energy_rate(t, W, Z, dW, dZ))
        for k in cfg.ladder:
            if k == "Dt":
                dZd = Zd
                ladder.E[k].append(_energy(Z, Zd, Aop(Z), m))
            else:
                T = fields[k]
                WI = modified_lie_hat(T, W, m)
                ZI = modified_lie_hat(T, Z, m)
                ladder.E[k].append(_energy(WI, ZI, Aop(WI), m))
                ladder.D[k].append(2 * inner_product(WI, _A_commutator(T, W, m, Aop), m))
        E1 = sum(np.sqrt(max(ladder.E[k][-1], 0.0)) for k in ladder.E)
        if F is not None:
            scale = max(scale, (max(t, dt) * norm(F(t), m)) ** 2)
        if E0 > cfg.blowup * max(scale, 1e-30) and E0 > 1e-20:
            raise EnergyBlowup(f"E0={E0:.3e} at t={t:.4f} exceeds {cfg.blowup:g} x scale {scale:.3e}")
        rows.append((t, E0, E1, dvm, np.nan))

    def energy_at(s, W, Z):
        ms = bg.metric(s)
        AW = cfg.operator(W, ms, s) if cfg.operator is not None else \
            smoothed_normal_op(bg.pressure(s), W, ms, bg.profile)
        return _energy(W, Z, AW, ms)

    def energy_rate(t, W, Z, dW, dZ, h=1e-4):
        # E0 is quadratic in (W, Z), so stepping along the exact tangent avoids the
        # start-up error of differencing the logged sequence
        hW, hZ = h * dW, h * dZ
        return (energy_at(t + h, W + hW, Z + hZ) - energy_at(t - h, W - hW, Z - hZ)) / (2 * h)

    log(times[0], W, Z)
    for n in range(len(times) - 1):
        t = times[n]
        k1 = rhs(t, W, Z)
        k2 = rhs(t + dt / 2, W + dt / 2 * k1[0], Z + dt / 2 * k1[1])
        k3 = rhs(t + dt / 2, W + dt / 2 * k2[0], Z + dt / 2 * k2[1])
        k4 = rhs(t + dt, W + dt * k3[0], Z + dt * k3[1])
        W = W + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Z = Z + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(Z))):
            raise EnergyBlowup(f"non-finite state at t={t + dt:.4f}")
        log(t + dt, W, Z)
    if len(times) >= 5:
        # consistency of the stored trajectory with D_t Z = Zdot - sigma_dot Z
        Za, Zda = np.array(Zs), np.array(Zds)
        sd = np.array([bg.metric(s).sigma_dot for s in times])
        gap = _fd_time_derivative(Za, dt) + sd[:, None] * Za - Zda
        res = np.abs(gap).reshape(len(times), -1).max(axis=1) / max(np.abs(Zda).max(), 1e-300)
        rows = [r[:4] + (float(res[k]),) for k, r in enumerate(rows)]
    return EvolutionResult(times, np.array(Ws), np.array(Zs), np.array(Zds), ladder, np.array(divs), rows)


# -- energy inequality -----------------------------------------------------------------------

def energy_constant(bg: Background, times: Sequence[float], h: float = 1e-4) -> float:
    """c = ||p-dot / p||_inf + ||g-dot||_inf + 2 with p-dot = kappa D_t(p / kappa), g-dot = kappa D_t(g / kappa)."""
    grid = bg.grid
    best_p, best_g = 0.0, 0.0
    for t in times:
        m = bg.metric(t)
        p = bg.pressure(t)
        pp = metric_from_state(bg.state(t + h))
        pm = metric_from_state(bg.state(t - h))
        pd = (pressure_solve(pp) / pp.kappa - pressure_solve(pm) / pm.kappa) / (2 * h) * m.kappa
        num = np.where(grid.boundary, 0.0, pd)
        den = np.where(grid.boundary, 1.0, p)
        ratio = np.abs(num / np.where(np.abs(den) < 1e-300, 1e-300, den))
        rb = np.abs(grid.dr(pd)[-1] / grid.dr(p)[-1]) if np.abs(grid.dr(p)[-1]).min() > 0 else np.array([0.0])
        best_p = max(best_p, float(ratio[~grid.boundary].max()), float(np.max(rb)))
        G = np.einsum("ab...,bc...->...ac", m.g_inv, m.check_g)
        ev = np.linalg.eigvals(G)
        best_g = max(best_g, float(np.abs(ev).max()))
    return best_p + best_g + 2.0


def energy_bound_check(res: EvolutionResult, c: float) -> dict:
    """|dE0/dt| <= sqrt(E0) (2 ||H|| + c sqrt(E0)) at every logged step."""
    E = res.ladder.E0
    t = np.asarray(res.ladder.times)
    if len(res.ladder.dE0) == len(E):
        dE = np.asarray(res.ladder.dE0)
    else:
        dE = _fd_time_derivative(E, t[1] - t[0]) if len(t) > 1 else np.zeros_like(E)
    H = np.asarray(res.ladder.H_norm)
    bound = np.sqrt(np.maximum(E, 0)) * (2 * H + c * np.sqrt(np.maximum(E, 0)))
    slack = bound - np.abs(dE)
    tol = 1e-10 * max(1.0, float(np.abs(dE).max()))
    return {"c": c, "ok": bool(np.all(slack >= -tol)), "min_slack": float(slack.min()),
            "ratio_max": float(np.max(np.abs(dE) / np.maximum(bound, 1e-300) * (bound > 0)))}


# -- divergence ODE -------------------------------------------------------------------------

def divergence_ode_solve(sigma_ddot: Callable[[float], np.ndarray], divF: Callable[[float], np.ndarray],
                         cfg: EvolutionConfig) -> tuple[np.ndarray, np.ndarray]:
    """D_t^2 phi + sigma_ddot phi = div F pointwise, zero data; returns (phi, D_t phi) on cfg.times."""
    times = cfg.times
    dt = cfg.dt
    s0 = np.asarray(divF(times[0]), dtype=float)
    phi = np.zeros_like(s0)
    psi = np.zeros_like(s0)
    P, Q = [phi.copy()], [psi.copy()]

    def f(t, a, b):
        return b, divF(t) - sigma_ddot(t) * a

    for n in range(len(times) - 1):
        t = times[n]
        k1 = f(t, phi, psi)
        k2 = f(t + dt / 2, phi + dt / 2 * k1[0], psi + dt / 2 * k1[1])
        k3 = f(t + dt / 2, phi + dt / 2 * k2[0], psi + dt / 2 * k2[1])
        k4 = f(t + dt, phi + dt * k3[0], psi + dt * k3[1])
        phi = phi + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        psi = psi + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        P.append(phi.copy())
        Q.append(psi.copy())
    return np.array(P), np.array(Q)


def divergence_energy(phi: np.ndarray, phit: np.ndarray, sigma_dot: np.ndarray) -> np.ndarray:
    """(D^_t phi)^2 + sigma_dot^2 phi^2, logged as a diagnostic."""
    hat = phit + sigma_dot * phi
    return hat ** 2 + sigma_dot ** 2 * phi ** 2


# -- decomposition ----------------------------------------------------------------------------

def gradient_part(phi: np.ndarray, phit: np.ndarray, m: MetricData):
    """W1 = g^{-1} grad q with laplacian q = phi, and W1-dot = D^_t W1."""
    solver = solver_for(m)
    q = solver.solve(phi)
    W1 = metric_gradient(q, m)
    eV = m.eulerian_jac(m.state.V) if m.state is not None and m.state.V is not None else np.zeros((2, 2) + m.grid.shape)
    Hq = _ehess(q, m)
    dq = m.eulerian_grad(q)
    lapV = np.stack([np.einsum("kk...->...", _ehess(m.state.V[k], m)) for k in range(2)]) \
        if m.state is not None and m.state.V is not None else np.zeros((2,) + m.grid.shape)
    rhs = phit + np.einsum("k...,k...->...", lapV, dq) + 2 * np.einsum("ki...,ik...->...", eV, Hq)
    qt = solver.solve(rhs)
    W1d = -np.einsum("ab...,bc...,c...->a...", m.g_inv, m.check_g, W1) + metric_gradient(qt, m)
    return W1, W1d, q


@dataclass
class DecompositionResult:
    times: np.ndarray
    W1: np.ndarray
    W01: np.ndarray
    W00: np.ndarray
    W: np.ndarray
    Wdot: np.ndarray
    residual: np.ndarray
    phi: np.ndarray
    parts: dict


def _B11(W1d, m, solver):
    B1, _ = B1_apply(W1d, m, solver)
    extra = np.einsum("ab...,bc...,c...->a...", m.g_inv, m.check_g, W1d)
    return project(B1 + 2 * extra, m)


def _B01(W1, m, solver):
    B0, _ = B0_apply(W1, m, solver)
    extra = np.einsum("ab...,bc...,c...->a...", m.g_inv, m.check_g_ddot, W1)
    return project(B0 + extra, m)


def smoothed_L1(bg: Background, cfg: EvolutionConfig, t: float, W, Wd, Wdd) -> np.ndarray:
    m = bg.metric(t)
    L1, pc = modified_linearized(m.state, W, Wd, Wdd, m)
    if cfg.operator is not None:
        Ae = cfg.operator(W, m, t)
    else:
        Ae = smoothed_normal_op(bg.pressure(t), W, m, bg.profile)
    return L1 - pc.AW + Ae


def decompose_and_solve(bg: Background, F: Callable[[float], np.ndarray], cfg: EvolutionConfig) -> DecompositionResult:
    """W = W1 + W01 + W00 with W1 from the divergence ODE and the others from the smoothed evolution."""
    if cfg.operator is None:
        bg.with_epsilon(cfg.epsilon)
    times = cfg.times
    phi, phit = divergence_ode_solve(lambda t: bg.metric(t).sigma_ddot,
                                     lambda t: div(F(t), bg.metric(t)), cfg)
    W1s, W1ds, F01, F00 = [], [], [], []
    for k, t in enumerate(times):
        m = bg.metric(t)
        solver = solver_for(m)
        W1, W1d, _ = gradient_part(phi[k], phit[k], m)
        W1s.append(W1)
        W1ds.append(W1d)
        if cfg.operator is not None:
            AW1 = cfg.operator(W1, m, t)
        else:
            AW1 = smoothed_normal_op(bg.pressure(t), W1, m, bg.profile)
        F01.append(-AW1)
        F00.append(project(F(t), m) + _B11(W1d, m, solver) + _B01(W1, m, solver))
    W1s, W1ds = np.array(W1s), np.array(W1ds)
    inner = replace(cfg, energy_log=False, ladder=())
    r01 = evolve_smoothed(bg, sampled_forcing(times, np.array(F01)), inner, check_divergence=False)
    r00 = evolve_smoothed(bg, sampled_forcing(times, np.array(F00)), inner, check_divergence=False)
    W = W1s + r01.W + r00.W
    Wd = W1ds + r01.Z + r00.Z
    # W1-ddot = kappa^{-1} D_t(kappa W1-dot) by fourth-order differences
    kap = np.array([bg.metric(t).kappa for t in times])
    W1dd = _fd_time_derivative(kap[:, None] * W1ds, cfg.dt) / kap[:, None]
    Wdd = W1dd + r01.Zdot + r00.Zdot
    res = []
    for k, t in enumerate(times):
        m = bg.metric(t)
        L = smoothed_L1(bg, cfg, t, W[k], Wd[k], Wdd[k])
        res.append(norm(L - F(t), m))
    return DecompositionResult(times, W1s, r01.W, r00.W, W, Wd, np.array(res), phi,
                               {"r01": r01, "r00": r00, "W1dot": W1ds})


# -- Picard iteration for L_0 ---------------------------------------------------------------

@dataclass
class PicardResult:
    W: np.ndarray
    Wdot: np.ndarray
    iterations: int
    increments: list
    factors: list
    converged: bool


def _path_norm(Wpath: np.ndarray, grid: DiskGrid) -> float:
    return max(sobolev_norm(w, 1, grid=grid) for w in Wpath)


def solve_L0_picard(bg: Background, F: Callable[[float], np.ndarray], cfg: EvolutionConfig,
                    max_iter: int = 20, tol: float = 1e-8) -> PicardResult:
    """L_1 W_k = B_3 W_{k-1} + F, W_0 = 0, until sup_t ||W_k - W_{k-1}||_1 < tol."""
    grid = bg.grid
    times = cfg.times
    Wprev = np.zeros((len(times), 2) + grid.shape)
    Wd = np.zeros_like(Wprev)
    incs, facs = [], []
    bad = 0
    rhs = F
    for it in range(1, max_iter + 1):
        res = decompose_and_solve(bg, rhs, cfg)
        inc = _path_norm(res.W - Wprev, grid)
        incs.append(inc)
        if len(incs) >= 2 and incs[-2] > 0:
            fac = inc / incs[-2]
            facs.append(fac)
            bad = bad + 1 if fac > 1 else 0
            if bad >= 3:
                raise NoContraction(f"contraction factors {facs[-3:]} exceed 1")
        Wprev, Wd = res.W, res.Wdot
        B3s = np.array([B3_apply(Wprev[k], bg.state(t), bg.metric(t)) for k, t in enumerate(times)])
        Fscale = max(1.0, max(np.abs(F(t)).max() for t in times))
        if inc < tol or (it == 1 and np.abs(B3s).max() <= tol * Fscale):
            # at an exact solution B_3 vanishes and the next iterate would repeat this one
            return PicardResult(Wprev, Wd, it, incs, facs, True)
        S = sampled_forcing(times, B3s)
        rhs = (lambda t, S=S: S(t) + F(t))
    return PicardResult(Wprev, Wd, max_iter, incs, facs, False)
