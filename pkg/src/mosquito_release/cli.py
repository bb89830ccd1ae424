"""Command-line front end.

    python -m mosquito_release simulate  scenario.json [--set key=value ...] [--strict]
    python -m mosquito_release optimize  scenario.json [--set key=value ...]
    python -m mosquito_release equilibria scenario.json [--json]
    python -m mosquito_release check     scenario.json

Exit codes: 0 success, 2 configuration error, 3 trajectory divergence,
4 optimisation failure, 5 bound violation under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig
from .control import ControlGrid
from .dynamics import DivergenceError, simulate, verify_bounds, write_trajectory_csv
from .model import check_assumptions
from .optimizer import ControlProblem, OptimizationError, solve
from .plots import trajectory_svg, write_gnuplot_dat
from .stability import classified_equilibria

log = logging.getLogger("mosquito_release")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OPT_FAILED, EXIT_BOUNDS = 0, 2, 3, 4, 5


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dump(obj, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def versions() -> dict:
    return {"mosquito_release": __version__, "numpy": np.__version__,
            "python": platform.python_version()}


def control_values(cfg: ScenarioConfig) -> np.ndarray:
    grid = cfg.grid
    ctl = cfg.control or {"constant": 0.0}
    if "constant" in ctl:
        return np.full(grid.N, float(ctl["constant"]))
    if "schedule" in ctl:
        # [[t, value], ...]: value holds from t until the next breakpoint
        pts = sorted((float(t), float(v)) for t, v in ctl["schedule"])
        if not pts:
            raise ConfigError("empty control schedule")
        mids = grid.nodes[:-1] + 0.5 * grid.dt
        times = np.array([t for t, _ in pts])
        vals = np.array([v for _, v in pts])
        idx = np.searchsorted(times, mids, side="right") - 1
        return np.where(idx >= 0, vals[np.clip(idx, 0, None)], 0.0)
    path = Path(ctl["csv"])
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read control CSV {path}: {exc}") from None
    if "u" not in header:
        raise ConfigError(f"control CSV {path} has no 'u' column")
    u = data[:, header.index("u")]
    if len(u) == grid.N + 1:
        u = u[:-1]  # trajectory layout: the last node repeats the last value
    if len(u) != grid.N:
        raise ConfigError(f"control CSV has {len(u)} rows, mesh needs {grid.N}")
    return u


def write_control_csv(u: ControlGrid, path) -> None:
    """``t_start,t_end,u``: one row per interval."""
    nodes = u.grid.nodes
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("t_start,t_end,u\n")
        for k, v in enumerate(u.values):
            fh.write(f"{nodes[k]:.17g},{nodes[k + 1]:.17g},{float(v):.17g}\n")


def _outdir(cfg, args) -> Path:
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(cfg) -> dict:
    return {"T": cfg.T, "C": cfg.C, "Ubar": cfg.Ubar}


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    p = cfg.build_params()
    grid = cfg.grid
    v = control_values(cfg)
    if np.any(v < 0) or np.any(v > cfg.Ubar) or not np.all(np.isfinite(v)):
        raise ConfigError(f"control must satisfy 0 <= u <= Ubar = {cfg.Ubar}")
    used = float(v.sum() * grid.dt)
    C = cfg.C
    if used > cfg.C * (1 + 1e-9) + 1e-12:
        log.warning("control releases %.6g > budget C = %.6g; simulating anyway",
                    used, cfg.C)
        C = math.inf
    u = ControlGrid(grid, v, cfg.Ubar, C)
    traj = simulate(p, u, init=cfg.initial_state)
    bounds = verify_bounds(traj, p)

    out = _outdir(cfg, args)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_gnuplot_dat(traj, out / "trajectory.dat")
    trajectory_svg(traj, out / "trajectory.svg", title=f"{cfg.model} simulation")
    problem = ControlProblem(p, grid, cfg.Ubar, max(cfg.C, used))
    summary = {
        "command": "simulate",
        "cost": problem.cost(traj),
        "budget_used": used,
        "budget_ratio": used / cfg.C if cfg.C > 0 else None,
        "final_state": dict(zip(traj.names, traj.states[-1])),
        "bounds": bounds.as_dict(),
        "assumption_report": check_assumptions(p, _scenario(cfg)).as_dict(),
        "config": cfg.resolved(),
        "versions": versions(),
    }
    _dump(summary, out / "summary.json")
    _dump(bounds.as_dict(), out / "bounds.json")
    print(f"wrote {out}/trajectory.csv ({grid.N + 1} nodes); bounds "
          f"{'ok' if bounds.ok else f'VIOLATED ({len(bounds.violations)})'}")
    if not bounds.ok and args.strict:
        return EXIT_BOUNDS
    return EXIT_OK


def cmd_optimize(cfg: ScenarioConfig, args) -> int:
    p = cfg.build_params()
    report = check_assumptions(p, _scenario(cfg))
    for c in report.failures:
        log.warning("assumption %s fails: %.6g %s %.6g", c.name, c.lhs, c.relation, c.rhs)
    problem = ControlProblem(p, cfg.grid, cfg.Ubar, cfg.C)
    o = cfg.optimizer
    sol = solve(problem, max_iter=int(o["max_iter"]), tol=float(o["tol"]),
                starts=int(o["starts"]), seed=int(o["seed"]))
    d = sol.diagnostics
    bounds = verify_bounds(sol.trajectory, p)

    out = _outdir(cfg, args)
    write_control_csv(sol.control, out / "control.csv")
    write_trajectory_csv(sol.trajectory, out / "trajectory.csv")
    write_gnuplot_dat(sol.trajectory, out / "trajectory.dat")
    trajectory_svg(sol.trajectory, out / "optimal.svg", per_compartment=False,
                   title=f"{cfg.model}: T={cfg.T:g}, C={cfg.C:g}, Ubar={cfg.Ubar:g}")
    summary = {
        "command": "optimize",
        "cost": sol.cost,
        "budget_used": d.budget_used,
        "budget_ratio": d.budget_ratio,
        "tail_zero_time": d.tail_zero_time,
        "bang_bang_fraction": d.bang_bang_fraction,
        "release_centroid": d.release_centroid,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "stationarity": sol.stationarity,
        "per_start_costs": sol.per_start_costs,
        "per_start": sol.per_start,
        "seed": sol.seed,
        "pmp": d.as_dict(),
        "bounds": bounds.as_dict(),
        "assumption_report": report.as_dict(),
        "config": cfg.resolved(),
        "versions": versions(),
    }
    _dump(summary, out / "summary.json")
    print(f"cost {sol.cost:.10g}  budget ratio {d.budget_ratio:.4f}  "
          f"T0 {d.tail_zero_time:.4g}  bang-bang {d.bang_bang_fraction:.3f}  "
          f"({'converged' if sol.converged else 'not converged'} after "
          f"{sol.iterations} iterations)")
    if not bounds.ok and args.strict:
        return EXIT_BOUNDS
    return EXIT_OK


def cmd_equilibria(cfg: ScenarioConfig, args) -> int:
    p = cfg.build_params()
    eqs = classified_equilibria(p)
    report = check_assumptions(p)
    if args.json:
        print(json.dumps(_clean({
            "model": cfg.model, "K": p.K,
            "equilibria": [e.as_dict() for e in eqs],
            "assumption_report": report.as_dict(),
        }), indent=2))
        return EXIT_OK
    print(f"{cfg.model} equilibria (K = {p.K:.6f})")
    for e in eqs:
        comps = ", ".join(f"{x:.6g}" for x in e.state)
        eig = ", ".join(f"{z.real:.6g}{z.imag:+.3g}j" if z.imag else f"{z.real:.6g}"
                        for z in e.eigenvalues)
        flags = f"  [{', '.join(e.flags)}]" if e.flags else ""
        print(f"  {e.label:15s} ({comps})  residual {e.residual:.3g}  "
              f"{e.stability}{flags}")
        print(f"  {'':15s} eigenvalues: {eig}")
    _print_report(report)
    return EXIT_OK


def _print_report(report) -> None:
    print("assumptions:")
    for c in report.checks:
        print(f"  {c.name:18s} {c.lhs:.6g} {c.relation} {c.rhs:.6g}  "
              f"{'ok' if c.holds else 'FAILS'}")


def cmd_check(cfg: ScenarioConfig, args) -> int:
    report = check_assumptions(cfg.build_params(), _scenario(cfg))
    if args.json:
        print(json.dumps(_clean(report.as_dict()), indent=2))
    else:
        _print_report(report)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize,
            "equilibria": cmd_equilibria, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mosquito-release",
                                 description="Optimal mosquito release schedules")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="scenario JSON file")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry (dotted keys)")
        if name in ("simulate", "optimize"):
            sp.add_argument("-o", "--output", help="output directory (overrides config)")
            sp.add_argument("--strict", action="store_true",
                            help="exit nonzero when trajectory bounds are violated")
        if name in ("equilibria", "check"):
            sp.add_argument("--json", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ScenarioConfig.load(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OptimizationError as exc:
        print(f"optimisation failed: {exc}", file=sys.stderr)
        for entry in exc.logs:
            print(f"  {entry}", file=sys.stderr)
        return EXIT_OPT_FAILED


if __name__ == "__main__":
    sys.exit(main())
