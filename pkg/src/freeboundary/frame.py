"""Tangential vector fields on the disk and (modified) Lie derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cutoffs import rho_of_d, template_f, template_g, template_h
from .errors import MissingTrajectory, SpanFailure
from .fields import Field, OneForm, ScalarField, TwoForm, VectorField, like, values_of
from .grid import DiskGrid
from .metric import MetricData


@dataclass
class FrameField:
    """A vector field T^a with its Jacobian d_c T^a, evaluable anywhere in the disk."""
    kind: str                                   # rotation | interior | radial | time | custom
    evaluate: Optional[Callable] = None         # pts (2, ...) -> (T (2, ...), dT (2, 2, ...))
    metadata: dict = field(default_factory=dict)
    _on_grid: dict = field(default_factory=dict, repr=False)

    def on(self, grid: DiskGrid) -> tuple[np.ndarray, np.ndarray]:
        if self.evaluate is None:
            raise MissingTrajectory("the time field has no spatial coefficients")
        key = grid.shape
        if key not in self._on_grid:
            self._on_grid[key] = self.evaluate(grid.y)
        return self._on_grid[key]

    def coefficients(self, grid: DiskGrid) -> VectorField:
        return VectorField(grid, self.on(grid)[0])

    def divergence(self, grid: DiskGrid) -> np.ndarray:
        dT = self.on(grid)[1]
        return dT[0, 0] + dT[1, 1]

    def apply(self, q: np.ndarray, grid: DiskGrid) -> np.ndarray:
        """T q = T^c d_c q."""
        return np.einsum("c...,c...->...", self.on(grid)[0], grid.grad(q))


def rotation_field() -> FrameField:
    def ev(y):
        T = np.array([-y[1], y[0]])
        z, o = np.zeros_like(y[0]), np.ones_like(y[0])
        return T, np.array([[z, -o], [o, z]])
    return FrameField("rotation", ev)


def radial_field() -> FrameField:
    def ev(y):
        z, o = np.zeros_like(y[0]), np.ones_like(y[0])
        return np.array(y, dtype=float), np.array([[o, z], [z, o]])
    return FrameField("radial", ev)


def time_field() -> FrameField:
    return FrameField("time", None)


def polynomial_divfree_field(coeffs: dict) -> FrameField:
    """T = (d_2 psi, -d_1 psi) for psi = sum c_ij y1^i y2^j; exactly divergence free."""
    def ev(y):
        y1, y2 = y
        T = np.zeros((2,) + np.shape(y1))
        dT = np.zeros((2, 2) + np.shape(y1))

        def mono(i, j):
            return np.where(i >= 0, 1.0, 0.0) * (y1 ** max(i, 0)) * (y2 ** max(j, 0)) if i >= 0 and j >= 0 else 0.0
        for (i, j), c in coeffs.items():
            # psi_2 = j y1^i y2^{j-1};  psi_1 = i y1^{i-1} y2^j
            if j >= 1:
                T[0] += c * j * mono(i, j - 1)
                if i >= 1:
                    dT[0, 0] += c * j * i * mono(i - 1, j - 1)
                if j >= 2:
                    dT[0, 1] += c * j * (j - 1) * mono(i, j - 2)
            if i >= 1:
                T[1] -= c * i * mono(i - 1, j)
                if i >= 2:
                    dT[1, 0] -= c * i * (i - 1) * mono(i - 2, j)
                if j >= 1:
                    dT[1, 1] -= c * i * j * mono(i - 1, j - 1)
        return T, dT
    return FrameField("custom", ev, {"psi": dict(coeffs)})


def interior_field(center, scale: float, angle: float) -> FrameField:
    """Rotated, scaled, translated copy of (f(z1) g'(z2), -f'(z1) g(z2))."""
    c = np.asarray(center, dtype=float)
    Rm = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])

    def ev(y):
        y = np.asarray(y, dtype=float)
        d = y - c.reshape((2,) + (1,) * (y.ndim - 1))
        z = np.einsum("ji,j...->i...", Rm, d) / scale
        shape = z.shape[1:]
        inside = (np.abs(z[0]) < 0.5) & (np.abs(z[1]) < 0.5)
        zi = z[:, inside]
        f0, f1, f2 = (template_f(zi[0], k) for k in range(3))
        h0, h1 = template_h(zi[1]), template_h(zi[1], 1)
        g0 = template_g(zi[1])
        Sh = np.zeros((2,) + shape)
        dS = np.zeros((2, 2) + shape)
        Sh[:, inside] = [f0 * h0, -f1 * g0]
        dS[:, :, inside] = [[f1 * h0, f0 * h1], [-f2 * g0, -f1 * h0]]
        T = np.einsum("ij,j...->i...", Rm, Sh)
        dT = np.einsum("ij,jk...,lk->il...", Rm, dS, Rm) / scale
        return T, dT
    return FrameField("interior", ev, {"center": c.tolist(), "scale": scale, "angle": angle})


def hex_centers(pitch: float, radius: float) -> np.ndarray:
    pts = []
    n = int(np.ceil(radius / pitch)) + 2
    for j in range(-n, n + 1):
        for i in range(-n, n + 1):
            x = pitch * (i + 0.5 * (j % 2))
            yv = pitch * j * np.sqrt(3) / 2
            if np.hypot(x, yv) <= radius + 1e-12:
                pts.append((x, yv))
    return np.array(pts)


@dataclass
class TangentialFrame:
    s0: list
    s1: list
    radial: FrameField
    d0: float
    time: FrameField = field(default_factory=time_field)

    @property
    def spatial(self) -> list:
        return self.s0 + self.s1

    def span_report(self, grid: DiskGrid) -> dict:
        d = 1.0 - grid.R
        vals = np.array([T.on(grid)[0] for T in self.spatial])       # (K, 2, n_r, n_t)
        M = np.moveaxis(vals, (0, 1), (-1, -2))                       # (n_r, n_t, 2, K)
        sv = np.linalg.svd(M, compute_uv=False)[..., -1]
        mask = d >= self.d0
        worst = np.unravel_index(np.argmin(np.where(mask, sv, np.inf)), sv.shape)
        return {"min_singular": float(sv[mask].min()), "worst_node": (int(worst[0]), int(worst[1])),
                "worst_y": grid.y[:, worst[0], worst[1]].tolist()}


def build_frame(grid: DiskGrid, d0: float = 0.25, pitch: float = 0.125, scale: float = 0.25,
                tol: float = 1e-6) -> TangentialFrame:
    if not 0 < d0 < 0.5:
        raise ValueError("0 < d0 < 1/2")
    reach = 0.5 * scale * np.sqrt(2.0)
    rmax = 1.0 - d0 / 2 - reach
    s1 = [interior_field(c, scale, a) for c in hex_centers(pitch, rmax) for a in (0.0, np.pi / 2)]
    fr = TangentialFrame([rotation_field()], s1, radial_field(), d0)
    rep = fr.span_report(grid)
    if rep["min_singular"] < tol:
        raise SpanFailure(f"span check failed: sigma_min={rep['min_singular']:.2e} at y={rep['worst_y']}")
    return fr


# -- Lie derivatives -----------------------------------------------------------------

def _kind_of(obj, kind):
    if kind is not None:
        return kind
    if isinstance(obj, Field):
        return obj.kind
    raise ValueError("pass kind= for raw arrays")


def lie_derivative(T: FrameField, obj, grid: Optional[DiskGrid] = None, kind: Optional[str] = None,
                   context: Optional[dict] = None):
    """L_T on scalars, vector fields, one-forms and two-forms (beta_12).

    For the time field pass context={"path": callable t -> values, "t": t, "h": step};
    the result is the centred fourth-order difference in time.
    """
    kind = _kind_of(obj, kind)
    if T.kind == "time":
        if context is None or "path" not in context:
            raise MissingTrajectory("L_{D_t} needs a trajectory context")
        f, t = context["path"], context["t"]
        h = context.get("h", 1e-3)
        out = (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
        return like(obj, out) if isinstance(obj, Field) else out
    grid = grid or obj.grid
    v = values_of(obj)
    Tv, dT = T.on(grid)
    if kind == "scalar":
        out = T.apply(v, grid)
    elif kind == "vector":
        out = np.stack([T.apply(c, grid) for c in v]) - np.einsum("ac...,c...->a...", dT, v)
    elif kind == "oneform":
        out = np.stack([T.apply(c, grid) for c in v]) + np.einsum("ca...,c...->a...", dT, v)
    elif kind == "twoform":
        out = T.apply(v, grid) + (dT[0, 0] + dT[1, 1]) * v
    else:
        raise ValueError(f"unsupported kind {kind}")
    return like(obj, out)


def modified_lie_hat(T: FrameField, W, m: MetricData):
    """L_T W + (T sigma) W = kappa^{-1} L_T (kappa W)."""
    Ts = T.apply(m.sigma, m.grid)
    out = values_of(lie_derivative(T, values_of(W), m.grid, "vector")) + Ts * values_of(W)
    return like(W, out)


def modified_lie_check(T: FrameField, beta, m: MetricData):
    """L_T beta - (T sigma) beta for a two-form (beta_12)."""
    Ts = T.apply(m.sigma, m.grid)
    out = values_of(lie_derivative(T, values_of(beta), m.grid, "twoform")) - Ts * values_of(beta)
    return like(beta, out)


def hat_apply(T: FrameField, f: np.ndarray, m: MetricData) -> np.ndarray:
    """T f + (T sigma) f."""
    return T.apply(f, m.grid) + T.apply(m.sigma, m.grid) * f


def check_apply(T: FrameField, f: np.ndarray, m: MetricData) -> np.ndarray:
    """T f - (T sigma) f."""
    return T.apply(f, m.grid) - T.apply(m.sigma, m.grid) * f


def lie_tensor_check(T: FrameField, beta2: np.ndarray, m: MetricData) -> np.ndarray:
    """Check-modified Lie derivative of a general (2, 2) covariant tensor."""
    g = m.grid
    _, dT = T.on(g)
    Tb = np.stack([np.stack([T.apply(beta2[a, b], g) for b in range(2)]) for a in range(2)])
    out = Tb + np.einsum("ca...,cb...->ab...", dT, beta2) + np.einsum("cb...,ac...->ab...", dT, beta2)
    return out - T.apply(m.sigma, g) * beta2


def vector_commutator(T: FrameField, U: FrameField, grid: DiskGrid) -> np.ndarray:
    """[T, U]^a = T^c d_c U^a - U^c d_c T^a from the analytic Jacobians."""
    Tv, dT = T.on(grid)
    Uv, dU = U.on(grid)
    return np.einsum("c...,ac...->a...", Tv, dU) - np.einsum("c...,ac...->a...", Uv, dT)


def commutator_field(T: FrameField, U: FrameField) -> FrameField:
    """[T, U] as a field (Jacobian by spectral-free finite differences of the pointwise map)."""
    def ev(y):
        Tv, dT = T.evaluate(y)
        Uv, dU = U.evaluate(y)
        C = np.einsum("c...,ac...->a...", Tv, dU) - np.einsum("c...,ac...->a...", Uv, dT)
        h = 1e-5
        cols = []
        for c in range(2):
            e = np.zeros((2,) + (1,) * (np.ndim(y) - 1))
            e[c] = h
            cp = _comm_vals(T, U, y + e)
            cm = _comm_vals(T, U, y - e)
            cols.append((cp - cm) / (2 * h))
        return C, np.stack(cols, axis=1)
    return FrameField("custom", ev)


def _comm_vals(T, U, y):
    Tv, dT = T.evaluate(y)
    Uv, dU = U.evaluate(y)
    return np.einsum("c...,ac...->a...", Tv, dU) - np.einsum("c...,ac...->a...", Uv, dT)


# -- derivative probes ----------------------------------------------------------------

def normal_extension(m: MetricData) -> np.ndarray:
    """Eulerian unit-normal extension N~_i = rho'(d) n_i with n the Eulerian conormal direction."""
    g = m.grid
    yhat = g.y / g.R
    n = np.einsum("ai...,a...->i...", m.Jinv, yhat)
    n = n / np.sqrt((n ** 2).sum(axis=0))
    return rho_of_d(1.0 - g.R, 1) * n


def derivative_bound_probe(W, m: MetricData, frame: Optional[TangentialFrame] = None,
                           p: Optional[np.ndarray] = None) -> dict:
    """Empirical constants for the pointwise and L^2 bounds of |d beta| by curl, div and
    tangential (or normal) derivatives, in Eulerian components beta_i = (dx^i/dy^a) W^a."""
    g = m.grid
    Wv = values_of(W)
    beta = np.einsum("ia...,a...->i...", m.J, Wv)
    db = np.stack([m.eulerian_grad(beta[i]) for i in range(2)])      # db[i, k] = d_k beta_i
    Nt = normal_extension(m)
    q = np.eye(2)[:, :, None, None] - Nt[:, None] * Nt[None, :]
    full = (db ** 2).sum(axis=(0, 1))
    tang = np.einsum("kl...,ik...,il...->...", q, db, db)
    cu = db[1, 0] - db[0, 1]
    dv = db[0, 0] + db[1, 1]
    rhs1 = tang + cu ** 2 + dv ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(rhs1 > 1e-14 * max(full.max(), 1e-300), full / rhs1, 0.0)
    K = max(np.sqrt(sum((m.eulerian_grad(Nt[i]) ** 2).sum(axis=0) for i in range(2))).max(), 0.0)
    # N^k N^l d_i beta_k d_i beta_l
    normal = np.einsum("k...,l...,ki...,li...->...", Nt, Nt, db, db)
    w = m.kappa
    lhs2 = g.integrate(full * w)
    rhs2 = g.integrate((normal + cu ** 2 + dv ** 2 + K ** 2 * (beta ** 2).sum(axis=0)) * w)
    rep = {"lhs_L2": float(np.sqrt(lhs2)), "pointwise_C": float(r1.max()),
           "L2_C": float(lhs2 / rhs2) if rhs2 > 0 else 0.0, "K": float(K)}
    if p is not None:
        from .normal_op import normal_op
        from .calculus import norm
        from .elliptic import normal_derivative
        c0 = float((-normal_derivative(p, m)).min())
        AW = normal_op(p, Wv, m)
        rhs3 = norm(AW, m) + np.sqrt(g.integrate((cu ** 2 + dv ** 2) * w)) + norm(Wv, m)
        rep["c0"] = c0
        rep["normal_op_C"] = float(c0 * np.sqrt(lhs2) / rhs3) if rhs3 > 0 else 0.0
    return rep
