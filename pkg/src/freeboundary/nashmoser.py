"""Nash-Moser iteration over a tame-problem interface, initial-data reductions and toy test beds."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .calculus import holder_norm
from .cutoffs import plateau
from .elliptic import pressure_solve, solver_for
from .errors import Diverged, InverseFailure, LadderViolation
from .grid import DiskGrid
from .linearization import euler_map, first_variation
from .metric import CoordinateState, MetricData, metric_from_state
from .smoothing import smoothing_operator

MAX_HOLDER = 4.0      # highest Hoelder order the spectral grid resolves for diagnostics


# -- schedule and problem interface -------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Loss exponents, the target regularity alpha and theta_i = theta0 2^i."""
    mu: float = 5.0
    lam: float = 4.0
    d: float = 8.0
    alpha: float = 14.5
    theta0: float = 1.0
    delta: Optional[float] = None

    def __post_init__(self):
        a = self.alpha
        if not (a > self.mu and a > self.d and a > self.lam + 2 * self.mu):
            raise ValueError(f"alpha={a} must exceed mu, d and lambda + 2 mu")
        if float(a).is_integer():
            raise ValueError("alpha must not be an integer")
        if self.theta0 < 1:
            raise ValueError("theta0 must be >= 1")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")

    @classmethod
    def for_dimension(cls, n: int = 2, alpha: Optional[float] = None, theta0: float = 1.0,
                      delta: Optional[float] = None) -> "Schedule":
        mu, lam, d = 5, n // 2 + 3, n // 2 + 7
        alpha = lam + 2 * mu + 0.5 if alpha is None else alpha
        return cls(mu, lam, d, alpha, theta0, delta)

    @classmethod
    def for_problem(cls, problem: "TameProblem", theta0: Optional[float] = None,
                    delta: Optional[float] = None, alpha: Optional[float] = None) -> "Schedule":
        c = problem.constants
        return cls(c["mu"], c["lambda"], c["d"], c["alpha"] if alpha is None else alpha,
                   c.get("theta0", 1.0) if theta0 is None else theta0,
                   c.get("delta") if delta is None else delta)

    def theta(self, i: int) -> float:
        return math.ldexp(self.theta0, i)


@dataclass
class TameProblem:
    """Phi with its derivative, an approximate right inverse psi and the graded norms.

    `smoother(theta)` returns S_theta acting on slabs; `reference(f)`, when present,
    solves Phi(u) = f by an independent route.
    """
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    approx_inverse: Callable[[np.ndarray, np.ndarray], np.ndarray]
    norm: Callable[[np.ndarray, float, int], float]
    smoother: Callable[[float], Callable[[np.ndarray], np.ndarray]]
    constants: dict
    zero: np.ndarray
    name: str = ""
    reference: Optional[Callable[[np.ndarray], np.ndarray]] = None


# -- time slabs -------------------------------------------------------------------------------

def time_derivative(u: np.ndarray, times: np.ndarray, k: int = 1) -> np.ndarray:
    for _ in range(k):
        u = np.gradient(u, times, axis=0, edge_order=2)
    return u


def slab_norm(u: np.ndarray, a: float, k: int, times: np.ndarray, grid: DiskGrid) -> float:
    """|||u|||_{a,k} = sup_t sum_{j <= k} ||D_t^j u(t)||_a."""
    u = np.asarray(u, dtype=float)
    total = np.zeros(len(times))
    d = u
    for j in range(k + 1):
        if j:
            d = time_derivative(d, times)
        total += [holder_norm(d[n], a, grid) for n in range(len(times))]
    return float(total.max())


def slab_smoother(grid: DiskGrid, **options) -> Callable[[float], Callable[[np.ndarray], np.ndarray]]:
    """theta -> S_theta applied in space to every time level and component."""
    def build(theta: float):
        op = smoothing_operator(grid, theta, **options)

        def apply(u):
            u = np.asarray(u, dtype=float)
            flat = u.reshape((-1,) + grid.shape)
            return np.stack([op(v) for v in flat]).reshape(u.shape)
        return apply
    return build


# -- toy problems ------------------------------------------------------------------------------

TOY_KINDS = ("quadratic-scalar-field", "perturbed-identity")


class _GreenOperator:
    """G = inverse Dirichlet Laplacian on the flat disk, per time level."""

    def __init__(self, grid: DiskGrid):
        self.grid = grid
        self.metric = MetricData.flat(grid)
        self.solver = solver_for(self.metric)
        self._dense = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        flat = u.reshape((-1,) + self.grid.shape)
        return np.stack([self.solver.solve(v) for v in flat]).reshape(u.shape)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            n = self.grid.size
            cols = np.empty((n, n))
            e = np.zeros(n)
            for j in range(n):
                e[j] = 1.0
                cols[:, j] = self.solver.solve(e.reshape(self.grid.shape)).ravel()
                e[j] = 0.0
            self._dense = cols
        return self._dense


def _neumann_inverse(apply_K: Callable, g: np.ndarray, tol: float, max_terms: int) -> np.ndarray:
    """Partial sums of sum_k (-K)^k g until the increment drops below tol ||g||."""
    gn = np.abs(g).max()
    if gn == 0:
        return np.zeros_like(g)
    w = g.copy()
    term = g
    for _ in range(max_terms):
        term = -apply_K(term)
        w = w + term
        tn = np.abs(term).max()
        if not np.isfinite(tn) or tn > 1e6 * gn:
            raise InverseFailure("Neumann series diverges: the base point is too large")
        if tn <= tol * gn:
            return w
    raise InverseFailure(f"Neumann series did not reach {tol:g} in {max_terms} terms")


def toy_problem(kind: str = "quadratic-scalar-field", grid: Optional[DiskGrid] = None, n_t: int = 5,
                T: float = 1.0, beta: float = 1.0, inverse_tol: float = 1e-14,
                smoothing: Optional[dict] = None) -> TameProblem:
    """Phi(u) = u + B(u, u) on scalar slabs over [0, T] x disk.

    quadratic-scalar-field: B(u, v) = beta G(u v);
    perturbed-identity:     B(u, v) = beta (G u)(G v),
    with G the inverse Dirichlet Laplacian.  psi(u) = (I + 2 B(u, .))^{-1} by a truncated
    Neumann series.  Both maps lose no derivatives, so mu = lambda = d = 0; alpha sits just
    below the order K + 1 = 4 to which the default smoothing reproduces polynomials.
    """
    if kind not in TOY_KINDS:
        raise ValueError(f"kind must be one of {TOY_KINDS}")
    grid = grid or DiskGrid(24, 48)
    times = np.linspace(0.0, T, n_t)
    G = _GreenOperator(grid)

    if kind == "quadratic-scalar-field":
        def B(u, v):
            return beta * G(u * v)
    else:
        def B(u, v):
            return beta * G(u) * G(v)

    def phi(u):
        return u + B(u, u)

    def dphi(u, v):
        return v + 2.0 * B(u, v)

    def approx_inverse(u, g):
        if kind == "perturbed-identity":
            Gu = G(u)
            K = (lambda w: 2.0 * beta * Gu * G(w))
        else:
            K = (lambda w: 2.0 * B(u, w))
        w = _neumann_inverse(K, np.asarray(g, dtype=float), inverse_tol, 400)
        res = np.abs(dphi(u, w) - g).max()
        if res > 1e-6 * max(np.abs(g).max(), 1e-300):
            raise InverseFailure(f"inverse residual {res:.2e}")
        return w

    def norm(u, a, k=0):
        return slab_norm(u, a, k, times, grid)

    def reference(f, tol: float = 1e-13, max_iter: int = 50):
        return _damped_newton(f, G.dense(), kind, beta, grid, tol, max_iter)

    consts = {"mu": 0.0, "lambda": 0.0, "d": 0.0, "alpha": 3.75, "theta0": 2.0}
    prob = TameProblem(phi, dphi, approx_inverse, norm, slab_smoother(grid, **(smoothing or {})),
                       consts, np.zeros((n_t,) + grid.shape), kind, reference)
    prob.times = times
    prob.grid = grid
    return prob


def _damped_newton(f: np.ndarray, Gm: np.ndarray, kind: str, beta: float, grid: DiskGrid,
                   tol: float, max_iter: int) -> np.ndarray:
    """Reference solve of u + B(u, u) = f per time level with a dense Jacobian and backtracking."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    n = grid.size
    eye = np.eye(n)

    def Phi(u):
        if kind == "quadratic-scalar-field":
            return u + beta * Gm @ (u * u)
        Gu = Gm @ u
        return u + beta * Gu * Gu

    for k, fk in enumerate(f.reshape(-1, n)):
        u = np.zeros(n)
        r = Phi(u) - fk
        scale = max(np.abs(fk).max(), 1e-300)
        for _ in range(max_iter):
            rn = np.abs(r).max()
            if rn <= tol * scale:
                break
            if kind == "quadratic-scalar-field":
                J = eye + 2 * beta * Gm * u[None, :]
            else:
                J = eye + 2 * beta * (Gm @ u)[:, None] * Gm
            step = sla.solve(J, -r)
            lam = 1.0
            while True:
                trial = u + lam * step
                rt = Phi(trial) - fk
                if np.abs(rt).max() <= (1 - 0.5 * lam) * rn or lam < 1e-4:
                    break
                lam *= 0.5
            u, r = trial, rt
        else:
            raise Diverged("damped Newton did not converge")
        out.reshape(-1, n)[k] = u
    return out


# -- the iteration -----------------------------------------------------------------------------

@dataclass
class IterationState:
    """u_i with the history the update needs; E = sum_{j < i} e_j."""
    i: int
    u: np.ndarray
    phi_u: np.ndarray
    E: np.ndarray
    theta0: float = 1.0
    delta_u: list = field(default_factory=list)
    g: list = field(default_factory=list)
    e1: list = field(default_factory=list)        # e'_i
    e2: list = field(default_factory=list)        # e''_i
    e: list = field(default_factory=list)         # e_i = e'_i + e''_i (+ inverse residual)
    inverse_residual: list = field(default_factory=list)
    ladder: list = field(default_factory=list)    # per step: {a: ||du||_{a,2} theta^(alpha - a)}

    @property
    def theta(self) -> float:
        return math.ldexp(self.theta0, self.i)

    @classmethod
    def start(cls, problem: TameProblem, schedule: Schedule) -> "IterationState":
        z = np.zeros_like(problem.zero)
        return cls(0, z, problem.phi(z), z.copy(), schedule.theta0)


def ladder_orders(schedule: Schedule) -> list:
    out = [a for a in (0.0, 1.0, 2.0, 3.0) if a < schedule.alpha]
    top = schedule.alpha - 0.25
    if top <= MAX_HOLDER and top not in out:
        out.append(top)
    return out


def nash_moser_step(state: IterationState, problem: TameProblem, schedule: Schedule, f: np.ndarray,
                    ladder: Optional[Sequence[float]] = None) -> IterationState:
    """One update u_{i+1} = u_i + psi(S_i u_i) g_i with the error bookkeeping."""
    i = state.i
    S = problem.smoother(schedule.theta(i))
    if i == 0:
        g = S(f)
    else:
        Sp = problem.smoother(schedule.theta(i - 1))
        h = f - (state.E - state.e[-1])
        g = S(h) - Sp(h) - S(state.e[-1])
    v = S(state.u)
    du = problem.approx_inverse(v, g)
    u_new = state.u + du
    phi_new = problem.phi(u_new)
    lin_u = problem.dphi(state.u, du)
    lin_v = problem.dphi(v, du)
    e1 = lin_u - lin_v
    e2 = phi_new - state.phi_u - lin_u
    r = lin_v - g
    e = e1 + e2 + r
    orders = ladder_orders(schedule) if ladder is None else ladder
    th = schedule.theta(i)
    rungs = {a: problem.norm(du, a, 2) * th ** (schedule.alpha - a) for a in orders}
    if schedule.delta is not None:
        worst = max(rungs.values()) / schedule.delta
        if worst > 10:
            warnings.warn(f"step {i}: ladder ratio {worst:.2e} exceeds 10", LadderViolation)
    return IterationState(i + 1, u_new, phi_new, state.E + e, state.theta0,
                          state.delta_u + [du], state.g + [g], state.e1 + [e1], state.e2 + [e2],
                          state.e + [e], state.inverse_residual + [float(np.abs(r).max())],
                          state.ladder + [rungs])


def telescoping_defect(state: IterationState) -> float:
    """|Phi(u_i) - (sum g_j + E_i)| relative to |Phi(u_i)|; zero up to rounding."""
    if not state.g:
        return 0.0
    rhs = sum(state.g) + state.E
    return float(np.abs(state.phi_u - rhs).max() / max(np.abs(state.phi_u).max(), 1e-300))


def _fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def choose_delta(ladder: Sequence[dict], steps: int = 3) -> float:
    """Halve delta from 1 while the first `steps` iterations keep the decay ladder."""
    need = max(max(r.values()) for r in ladder[:steps])
    delta = 1.0
    while delta / 2 >= need:
        delta /= 2
    return delta


@dataclass
class NashMoserReport:
    u: np.ndarray
    iterations: int
    converged: bool
    thetas: list
    residuals: dict               # a -> [|||Phi(u_{i+1}) - f|||_a]
    rate_fit: dict                # a -> {"slope", "predicted", "relative_error"}
    quadratic_slope: float
    increment_sums: dict          # a -> sum_i |||du_i|||_{a,2}
    delta: float
    smallness: dict
    ladder: list
    telescoping: list
    inverse_residual: list
    flags: list

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, (np.floating, float)):
                return None if not np.isfinite(x) else float(x)
            if isinstance(x, (np.integer, int, bool, np.bool_)):
                return x if isinstance(x, bool) else int(x)
            return x
        payload = {k: clean(v) for k, v in self.__dict__.items() if k != "u"}
        return json.dumps(payload, indent=2, sort_keys=True)


def run(problem: TameProblem, schedule: Schedule, f: np.ndarray, max_iter: int = 12, tol: float = 1e-13,
        rate_orders: Sequence[float] = (0.0, 1.0, 2.0), warn: bool = True) -> NashMoserReport:
    """Iterate until |||Phi(u_i) - f|||_0 <= tol |||f|||_0 or max_iter steps."""
    f = np.asarray(f, dtype=float)
    flags = []
    top = schedule.alpha + schedule.lam
    fn_top = problem.norm(f, top, 0) if top <= MAX_HOLDER else None
    fscale = problem.norm(f, 0, 0)
    state = IterationState.start(problem, schedule)
    residuals = {a: [] for a in rate_orders}
    tele = []
    converged = fscale == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LadderViolation)
        while not converged and state.i < max_iter:
            state = nash_moser_step(state, problem, schedule, f)
            d = state.phi_u - f
            for a in rate_orders:
                residuals[a].append(problem.norm(d, a, 0))
            tele.append(telescoping_defect(state))
            r0 = residuals[rate_orders[0]][-1]
            if not np.isfinite(r0) or r0 > 1e3 * fscale:
                raise Diverged(f"residual {r0:.3e} at step {state.i}")
            converged = r0 <= tol * fscale
    n = state.i
    thetas = [schedule.theta(i) for i in range(n)]
    delta = schedule.delta if schedule.delta is not None else (choose_delta(state.ladder) if n else 1.0)
    ladder_rows = [{str(a): v / delta for a, v in rungs.items()} for rungs in state.ladder]
    for i, row in enumerate(ladder_rows):
        if max(row.values()) > 10:
            flags.append(f"ladder violated at step {i}")
            if warn:
                warnings.warn(f"step {i}: ladder ratio {max(row.values()):.2e} exceeds 10", LadderViolation)
    small = {"norm_order": top, "f_norm": fn_top, "delta_squared": delta ** 2,
             "holds": None if fn_top is None else bool(fn_top <= delta ** 2)}
    if small["holds"] is False:
        flags.append("f above the smallness gate")
    # residual after step i is governed by theta_i; fit over the decaying range
    fits = {}
    for a in rate_orders:
        res = residuals[a]
        floor = 1e-10 * max(problem.norm(f, a, 0), 1e-300)
        idx = [i for i in range(2, len(res)) if res[i] > floor]
        slope = _fit_slope([thetas[i] for i in idx], [res[i] for i in idx])
        pred = a - schedule.alpha - schedule.lam
        fits[a] = {"slope": slope, "predicted": pred, "points": len(idx),
                   "relative_error": abs(slope - pred) / abs(pred)}
    # quadratic shape of e'': both sides in the same norm, above the rounding floor
    x, y = [], []
    for du, e2 in zip(state.delta_u, state.e2):
        ne, nd = problem.norm(e2, 0, 0), problem.norm(du, 0, 0)
        if ne > 1e-12 * max(fscale, 1e-300) and nd > 0:
            x.append(nd)
            y.append(ne)
    sums = {a: float(sum(problem.norm(du, a, 2) for du in state.delta_u)) for a in (0.0, 1.0, 2.0)}
    return NashMoserReport(state.u, n, bool(converged), thetas, residuals, fits, _fit_slope(x, y), sums,
                           delta, small, ladder_rows, tele, state.inverse_residual, flags)


# -- initial data reductions ----------------------------------------------------------------------

@dataclass
class PowerSeriesInit:
    """x_0(t) = sum_k x_k t^k / k! chi(t / eps_k); the cutoff acts on the terms k >= 2 only."""
    grid: DiskGrid
    coeffs: list
    eps: list

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def derivative(self, t: float, n: int = 0) -> np.ndarray:
        """D_t^n x_0 at time t."""
        out = np.zeros_like(self.coeffs[0])
        for k, c in enumerate(self.coeffs):
            if k < 2:
                if n <= k:
                    out = out + c * t ** (k - n) / math.factorial(k - n)
                continue
            e = self.eps[k]
            for j in range(n + 1):
                if j > k:
                    break
                tj = t ** (k - j) / math.factorial(k - j)
                chi = plateau(t / e, 0.5, 1.0, n - j) / e ** (n - j)
                out = out + math.comb(n, j) * tj * chi * c
        return out

    def state(self, t: float) -> CoordinateState:
        return CoordinateState(self.grid, self.derivative(t, 0), self.derivative(t, 1),
                               self.derivative(t, 2), t=t)

    def forcing(self, t: float) -> np.ndarray:
        """F_0(t) = Phi(x_0)(t)."""
        return euler_map(self.state(t))


def power_series_init(grid: DiskGrid, f0: np.ndarray, v0: np.ndarray, m: int = 3) -> PowerSeriesInit:
    """Taylor data of a solution at t = 0 from (x, D_t x) = (f0, v0), through D_t^m x.

    D_t^2 x = -grad p(x, v); D_t^3 x = -D_t grad p, the variation of grad p along (V, A).
    """
    if not 1 <= m <= 3:
        raise ValueError("order m must lie in 1..3")
    f0 = np.asarray(f0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    coeffs = [f0, v0]
    if m >= 2:
        st = CoordinateState(grid, f0, v0, np.zeros_like(f0))
        mt = metric_from_state(st)
        a0 = -mt.eulerian_grad(pressure_solve(mt))
        coeffs.append(a0)
        if m >= 3:
            st = CoordinateState(grid, f0, v0, a0)
            coeffs.append(-first_variation(st, v0, a0, np.zeros_like(f0), mt))
    eps = [np.inf, np.inf]
    for k in range(2, len(coeffs)):
        eps.append(0.5 / (holder_norm(coeffs[k], k, grid) + 1.0))
    return PowerSeriesInit(grid, coeffs, eps)


def shift_forcing(F0: Callable[[float], np.ndarray], delta: float,
                  T: Optional[float] = None) -> Callable[[float], np.ndarray]:
    """f_delta = F_delta - F_0 with F_delta(t) = F_0(t - delta) for t >= delta, 0 before."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if T is not None and delta >= T:
        raise ValueError("delta must be smaller than T")

    def f(t: float) -> np.ndarray:
        base = np.asarray(F0(t), dtype=float)
        if delta == 0:
            return np.zeros_like(base)
        shifted = np.asarray(F0(t - delta), dtype=float) if t >= delta else np.zeros_like(base)
        return shifted - base
    return f


# -- the Euler functional (exploratory) -------------------------------------------------------------

def euler_problem(grid: DiskGrid, f0: np.ndarray, v0: np.ndarray, T: float = 0.1, dt: float = 0.02,
                  epsilon: float = 0.25, picard_iter: int = 8) -> tuple:
    """Phi~(u) = Phi(x_0 + u) - Phi(x_0) on a uniform time slab, with psi from the Picard solve of L_0.

    u is an Eulerian displacement slab of shape (n_t, 2, n_r, n_theta).  Returns the problem
    and the power-series background x_0.  Diagnostics only: the inverse is approximate.
    """
    from scipy.interpolate import CubicSpline
    from .evolve import Background, EvolutionConfig, sampled_forcing, solve_L0_picard

    x0 = power_series_init(grid, f0, v0, 3)
    cfg = EvolutionConfig(dt=dt, T=T, epsilon=epsilon, energy_log=False, ladder=())
    times = cfg.times
    F0 = np.stack([x0.forcing(t) for t in times])

    def states(u):
        du, ddu = time_derivative(u, times, 1), time_derivative(u, times, 2)
        return [CoordinateState(grid, x0.derivative(t, 0) + u[k], x0.derivative(t, 1) + du[k],
                                x0.derivative(t, 2) + ddu[k], t=t) for k, t in enumerate(times)]

    def phi(u):
        return np.stack([euler_map(s) for s in states(u)]) - F0

    def dphi(u, v):
        dv, ddv = time_derivative(v, times, 1), time_derivative(v, times, 2)
        return np.stack([first_variation(s, v[k], dv[k], ddv[k]) for k, s in enumerate(states(u))])

    def approx_inverse(u, g):
        spl = CubicSpline(times, u, axis=0)

        def path(t):
            return tuple(x0.derivative(t, n) + spl(t, n) for n in range(3))
        bg = Background(grid, path, epsilon)
        Jinv_g = np.stack([np.einsum("ai...,i...->a...", bg.metric(t).Jinv, g[k])
                           for k, t in enumerate(times)])
        res = solve_L0_picard(bg, sampled_forcing(times, Jinv_g), cfg, max_iter=picard_iter)
        return np.stack([np.einsum("ib...,b...->i...", bg.metric(t).J, res.W[k])
                         for k, t in enumerate(times)])

    def norm(u, a, k=0):
        return slab_norm(u, a, k, times, grid)

    sched = Schedule.for_dimension(2)
    consts = {"mu": sched.mu, "lambda": sched.lam, "d": sched.d, "alpha": sched.alpha, "theta0": 1.0}
    prob = TameProblem(phi, dphi, approx_inverse, norm, slab_smoother(grid), consts,
                       np.zeros((len(times), 2) + grid.shape), "euler")
    prob.times = times
    prob.grid = grid
    prob.F0 = F0
    return prob, x0
