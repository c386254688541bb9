"""Command-line harness: invariant suites, convergence studies, spectra, runs.

Outputs are CSV or JSON written by a single writer.  Identical arguments and
seed give identical bytes, except the `runtime` fields of JSON reports.

Exit codes: 0 when every gated assertion holds, 1 when one fails (the JSON
report is still written), 2 on configuration errors.

Every subcommand accepts --config FILE, a JSON object whose keys mirror the
long flags (dashes or underscores); flags given on the command line win.  The
default grid comes from the FREEBOUNDARY_GRID environment variable
(for example "32x64").
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

GRID_ENV = "FREEBOUNDARY_GRID"


class ConfigError(Exception):
    """Bad flags, config file or inputs; exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid must look like 32x64, got {text!r}") from None
    if a < 4 or b < 4 or b % 2:
        raise ConfigError(f"grid {text!r}: need n_r >= 4 and an even n_theta >= 4")
    return a, b


def default_grid(fallback: str = "32x64") -> str:
    return os.environ.get(GRID_ENV, fallback)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of numbers, got {text!r}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(obj) -> str:
    from .suites import _clean
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _load_snapshot(path: str, kind: str):
    from .fields import load
    try:
        grid, values, k = load(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read snapshot {path}: {exc}") from None
    if k != kind:
        raise ConfigError(f"snapshot {path} holds a {k} field, expected {kind}")
    return grid, values


# -- subcommands --------------------------------------------------------------------

def cmd_check(args) -> tuple[bool, dict]:
    from .suites import SUITES, run_checks
    crit = [int(c) for c in _float_list(args.criteria)] if args.criteria else list(SUITES)
    bad = [c for c in crit if c not in SUITES]
    if bad:
        raise ConfigError(f"unknown criteria {bad}; choose from {sorted(SUITES)}")
    rep = run_checks(parse_grid(args.grid), args.seed, crit, determinism=not args.no_determinism)
    for r in rep.results:
        print(r.line(), file=sys.stderr)
    payload = rep.as_dict()
    _write(args.out, _json(payload))
    return rep.passed, payload


def poisson_study(grids: Sequence[tuple[int, int]]) -> list[tuple]:
    """Dirichlet solves of Delta q = F on the flat disk with q = (1 - r^2) e^{y1} cos y2."""
    from .elliptic import solve_dirichlet
    from .grid import DiskGrid
    from .metric import MetricData
    rows, prev = [], None
    for n_r, n_t in grids:
        g = DiskGrid(n_r, n_t)
        y1, y2 = g.y
        w = np.exp(y1) * np.cos(y2)
        exact = (1 - g.R ** 2) * w
        F = -4 * w - 4 * np.exp(y1) * (y1 * np.cos(y2) - y2 * np.sin(y2))
        q = solve_dirichlet(F, MetricData.flat(g))
        e = q - exact
        err_inf = float(np.abs(e).max())
        err_l2 = float(np.sqrt(g.integrate(e * e)))
        order = float("nan") if prev is None else float(np.log(prev[1] / err_inf) / np.log(n_r / prev[0]))
        rows.append((n_r, n_t, err_inf, err_l2, order))
        prev = (n_r, err_inf)
    return rows


def cmd_poisson(args) -> tuple[bool, dict]:
    grids = [parse_grid(s) for s in args.grids.split(",")]
    rows = poisson_study(grids)
    lines = ["n_r,n_theta,err_inf,err_l2,order"]
    lines += [f"{a},{b},{c:.6e},{d:.6e},{e:.4f}" for a, b, c, d, e in rows]
    _write(args.out, "\n".join(lines) + "\n")
    ok = rows[-1][2] <= args.tol
    return ok, {"rows": rows, "tol": args.tol}


def cmd_project(args) -> tuple[bool, dict]:
    from .elliptic import div, leray_project
    from .fields import save
    from .metric import MetricData
    g, U = _load_snapshot(args.input, "vector")
    m = MetricData.flat(g)
    PU, p = leray_project(U, m)
    save(args.out, g, PU, "vector")
    dmax = float(np.abs(div(PU, m)[:-1]).max() / max(np.abs(U).max(), 1e-300))
    info = {"grid": list(g.shape), "div_max": dmax, "tol": args.tol}
    print(_json(info), end="", file=sys.stderr)
    return dmax <= args.tol, info


def cmd_spectrum(args) -> tuple[bool, dict]:
    from .grid import DiskGrid
    from .suites import spectrum_rows
    if args.kmax < 1:
        raise ConfigError("--kmax must be at least 1")
    rows = spectrum_rows(DiskGrid(*parse_grid(args.grid)), args.kmax)
    lines = ["k,eigenvalue,rel_err"] + [f"{k},{lam:.12e},{err:.6e}" for k, lam, err in rows]
    _write(args.out, "\n".join(lines) + "\n")
    return max(r[2] for r in rows) <= args.tol, {"rows": rows, "tol": args.tol}


def _background(name: str, grid, rate: float):
    from .evolve import Background
    from .metric import rotation_path, strain_path
    if name == "static":
        return Background.static(grid)
    if name == "strain":
        return Background(grid, strain_path(grid, rate))
    if name == "rotation":
        return Background(grid, rotation_path(grid, rate))
    raise ConfigError(f"unknown background {name}")


def _pattern_forcing(pattern: str, T: float):
    """Snapshots pattern.format(i=0, 1, ...) at uniform times on [0, T], splined in time."""
    from .evolve import sampled_forcing
    vals, grid = [], None
    i = 0
    while Path(pattern.format(i=i)).exists():
        g, v = _load_snapshot(pattern.format(i=i), "vector")
        if grid is not None and g != grid:
            raise ConfigError("forcing snapshots use different grids")
        grid = g
        vals.append(v)
        i += 1
    if len(vals) < 2:
        raise ConfigError(f"need at least two forcing snapshots matching {pattern!r} (use {{i}})")
    return grid, sampled_forcing(np.linspace(0.0, T, len(vals)), np.array(vals))


def cmd_evolve(args) -> tuple[bool, dict]:
    from .errors import CflViolation, EnergyBlowup
    from .evolve import EvolutionConfig, evolve_smoothed
    from .grid import DiskGrid
    from .normal_op import stream_field
    try:
        cfg = EvolutionConfig(dt=args.dt, T=args.T, epsilon=args.eps)
    except (ValueError, CflViolation) as exc:
        raise ConfigError(str(exc)) from None
    if args.forcing:
        grid, F = _pattern_forcing(args.forcing, args.T)
    else:
        grid = DiskGrid(*parse_grid(args.grid))
        F = None
    bg = _background(args.background, grid, args.rate)
    if F is None:
        y1, y2 = grid.y

        def F(t):
            return np.sin(3 * t) * t * stream_field((1 - grid.R ** 2) * (1 + y1 * y2), bg.metric(t))
    try:
        res = evolve_smoothed(bg, F, cfg)
    except EnergyBlowup as exc:
        return False, {"error": str(exc)}
    _write(args.out, res.csv())
    dmax = float(res.div_max.max())
    return dmax <= args.div_tol, {"div_max": dmax, "div_tol": args.div_tol, "steps": cfg.n_steps}


def cmd_smooth(args) -> tuple[bool, dict]:
    from .fields import save
    from .smoothing import smooth
    if args.theta < 1:
        raise ConfigError("--theta must be at least 1")
    g, u = _load_snapshot(args.input, "scalar")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = np.asarray(smooth(u, args.theta, g), dtype=float)
    save(args.out, g, out, "scalar")
    return True, {"theta": args.theta}


def cmd_smooth_verify(args) -> tuple[bool, dict]:
    from .grid import DiskGrid
    from .smoothing import verify_smoothing
    g = DiskGrid(*parse_grid(args.grid))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = verify_smoothing(g, thetas=_float_list(args.thetas))
    _write(args.out, rep.csv())
    ok = all(c <= args.bound for c in rep.constants.values())
    return ok, {"constants": rep.constants, "bound": args.bound}


def cmd_nashmoser(args) -> tuple[bool, dict]:
    from .errors import Diverged, InverseFailure
    from .grid import DiskGrid
    from .nashmoser import Schedule, euler_problem, run, shift_forcing, toy_problem
    from .suites import toy_data
    g = DiskGrid(*parse_grid(args.grid))
    try:
        if args.problem == "toy":
            prob = toy_problem(args.kind, g)
            f = toy_data(prob)
        else:
            y1, y2 = g.y
            prob, x0 = euler_problem(g, g.y.copy(), 0.5 * np.array([y1, -y2]))
            fd = shift_forcing(x0.forcing, args.shift, T=prob.times[-1])
            f = np.stack([fd(t) for t in prob.times])
        sched = Schedule.for_problem(prob, theta0=args.theta0, delta=args.delta, alpha=args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = run(prob, sched, f, max_iter=args.max_iter, warn=False)
    except (Diverged, InverseFailure) as exc:
        info = {"problem": args.problem, "error": str(exc)}
        _write(args.out, _json(info))
        return False, info
    payload = json.loads(rep.to_json())
    payload["problem"] = args.problem
    if args.problem == "toy":
        ref = prob.reference(f)
        payload["newton_match"] = float(np.abs(rep.u - ref).max() / np.abs(ref).max())
        ok = rep.converged
    else:
        payload["exploratory"] = True
        ok = True
    _write(args.out, _json(payload))
    return ok, payload


def cmd_monitor(args) -> tuple[bool, dict]:
    from .grid import DiskGrid
    from .linearization import condition_monitor
    from .metric import Trajectory, rotation_path, shear_path, strain_path
    g = DiskGrid(*parse_grid(args.grid))
    paths = {"rotation": lambda: rotation_path(g, args.rate), "strain": lambda: strain_path(g, args.rate),
             "shear": lambda: shear_path(g)}
    if args.path not in paths:
        raise ConfigError(f"unknown path {args.path}")
    if args.n < 1 or args.T < 0:
        raise ConfigError("--n must be positive and --T nonnegative")
    times = np.linspace(0.0, args.T, args.n) if args.n > 1 else np.array([0.0])
    rep = condition_monitor(Trajectory.from_path(g, paths[args.path](), times))
    payload = rep.as_dict()
    _write(args.out, _json(payload))
    return all(rep.physical_ok), payload


# -- parser ------------------------------------------------------------------------------

COMMANDS = {
    "check": (cmd_check, "run the acceptance suites",
              "Artifact: JSON report {passed, total_runtime, results: [{criterion, name, passed, parts, "
              "values, runtime, runtime_limit}]}.  Values are seed-deterministic; runtimes are not."),
    "poisson": (cmd_poisson, "Dirichlet convergence study on a manufactured solution",
                "Artifact: CSV with columns n_r,n_theta,err_inf,err_l2,order (order against the previous row)."),
    "project": (cmd_project, "Leray-project a vector snapshot on the flat disk",
                "Artifact: disk-field v1 vector snapshot of PU; a JSON line with the divergence goes to stderr."),
    "spectrum": (cmd_spectrum, "eigen test of A_p with p = (1 - r^2)/2",
                 "Artifact: CSV with columns k,eigenvalue,rel_err, one row per k = 1..kmax."),
    "evolve": (cmd_evolve, "integrate the smoothed linearized equation",
               "Artifact: CSV with columns t,E0,E1,divW_max,residual, one row per logged step."),
    "smooth": (cmd_smooth, "apply S_theta to a scalar snapshot",
               "Artifact: disk-field v1 scalar snapshot of S_theta u."),
    "smooth-verify": (cmd_smooth_verify, "fit the smoothing constants",
                      "Artifact: CSV with columns estimate,sample,theta,a,b,ratio."),
    "nashmoser": (cmd_nashmoser, "run the Nash-Moser iteration",
                  "Artifact: JSON report with per-iteration residuals, ladder rows, rate fits, quadratic slope, "
                  "telescoping defects, inverse residuals and flags."),
    "monitor": (cmd_monitor, "condition monitor along an analytic path",
                "Artifact: JSON with c0, M, N per time, the threshold values and the pass flags."),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freeboundary", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    grid = default_grid()
    for name, (_, helptext, schema) in COMMANDS.items():
        s = sub.add_parser(name, help=helptext, description=f"{helptext}.  {schema}")
        s.add_argument("--config", help="JSON file whose keys mirror the long flags")
        s.add_argument("--report", default=None,
                       help="JSON report path written when an assertion fails (default <command>-report.json)")
        if name == "check":
            s.add_argument("--grid", default=grid)
            s.add_argument("--seed", type=int, default=0)
            s.add_argument("--criteria", default="", help="comma separated subset of 1..9")
            s.add_argument("--no-determinism", action="store_true", help="skip the second pass")
            s.add_argument("--out", default="check-report.json")
        elif name == "poisson":
            s.add_argument("--grids", default="8x16,12x24,16x32,24x48")
            s.add_argument("--tol", type=float, default=1e-8)
            s.add_argument("--out", default="-")
        elif name == "project":
            s.add_argument("--in", dest="input", required=True)
            s.add_argument("--out", required=True)
            s.add_argument("--tol", type=float, default=1e-8)
        elif name == "spectrum":
            s.add_argument("--grid", default=default_grid("64x128"))
            s.add_argument("--kmax", type=int, default=5)
            s.add_argument("--tol", type=float, default=1e-2)
            s.add_argument("--out", default="-")
        elif name == "evolve":
            s.add_argument("--grid", default=default_grid("24x48"))
            s.add_argument("--eps", type=float, default=0.25)
            s.add_argument("--dt", type=float, default=0.02)
            s.add_argument("--T", type=float, default=0.4)
            s.add_argument("--background", default="strain", choices=["static", "strain", "rotation"])
            s.add_argument("--rate", type=float, default=0.5)
            s.add_argument("--forcing", default=None,
                           help="snapshot path pattern with {i}, sampled uniformly on [0, T]")
            s.add_argument("--div-tol", type=float, default=1e-7)
            s.add_argument("--out", default="-")
        elif name == "smooth":
            s.add_argument("--theta", type=float, required=True)
            s.add_argument("--in", dest="input", required=True)
            s.add_argument("--out", required=True)
        elif name == "smooth-verify":
            s.add_argument("--grid", default=grid)
            s.add_argument("--thetas", default="2,4,8,16,32,64")
            s.add_argument("--bound", type=float, default=50.0)
            s.add_argument("--out", default="-")
        elif name == "nashmoser":
            s.add_argument("--problem", choices=["toy", "euler"], default="toy")
            s.add_argument("--kind", default="quadratic-scalar-field",
                           choices=["quadratic-scalar-field", "perturbed-identity"])
            s.add_argument("--grid", default=default_grid("24x48"))
            s.add_argument("--alpha", type=float, default=None)
            s.add_argument("--theta0", type=float, default=None)
            s.add_argument("--delta", type=float, default=None)
            s.add_argument("--shift", type=float, default=0.02, help="forcing shift for the euler problem")
            s.add_argument("--max-iter", type=int, default=12)
            s.add_argument("--out", default="report.json")
        elif name == "monitor":
            s.add_argument("--grid", default=grid)
            s.add_argument("--path", default="strain", choices=["rotation", "strain", "shear"],
                           help="the gate is c0 > 0 at every time; rigid rotation fails it")
            s.add_argument("--rate", type=float, default=1.0)
            s.add_argument("--T", type=float, default=0.5)
            s.add_argument("--n", type=int, default=5)
            s.add_argument("--out", default="-")
    return p


def _config_path(argv: Sequence[str]) -> Optional[str]:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    path = _config_path(argv)
    command = next((t for t in argv if t in COMMANDS), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    try:
        conf = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(conf, dict):
        raise ConfigError("config must be a JSON object")
    conf = {str(k).replace("-", "_"): v for k, v in conf.items()}
    conf.pop("command", None)
    if "in" in conf:
        conf["input"] = conf.pop("in")
    sub = parser._subparsers._group_actions[0].choices[command]
    dests = {a.dest for a in sub._actions}
    unknown = sorted(set(conf) - dests)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    # file values become defaults, so explicit flags still override them
    sub.set_defaults(**conf)
    for action in sub._actions:
        if action.dest in conf:
            action.required = False
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    from .errors import (CflViolation, CollarTooThin, FreeBoundaryError, IllConditionedMoments,
                         ResolutionExceeded)
    setup_errors = (ConfigError, CflViolation, CollarTooThin, IllConditionedMoments, ResolutionExceeded, ValueError)
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"freeboundary: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        ok, payload = COMMANDS[args.command][0](args)
    except setup_errors as exc:
        print(f"freeboundary: error: {exc}", file=sys.stderr)
        return 2
    except FreeBoundaryError as exc:
        ok, payload = False, {"error": f"{type(exc).__name__}: {exc}"}
    if not ok:
        path = args.report or f"{args.command}-report.json"
        Path(path).write_text(_json({"command": args.command, "passed": False, "details": payload}))
        print(f"freeboundary: assertion failed; report written to {path}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
