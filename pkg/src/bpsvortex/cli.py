"""Command line front end: ``bpsvortex {check,solve,sweep,verify,run} CONFIG``.

Exit codes: 0 success, 1 existence condition unsatisfied (or torus solve
refused), 2 configuration error, 3 non-convergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plane as P
from . import torus as T
from . import verify as V
from .coupling import CouplingParams, check_existence, critical_area
from .io import ConfigError, RunConfig, format_report, load_config, write_csv, write_fields, write_report
from .observables import compute_observables
from .sources import VortexSpec

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_VERIFY = 4


def existence_record(params: CouplingParams, spec: VortexSpec, area: float | None) -> dict:
    """Verdict, per-species bounds, ``q_i`` and margins; planar configurations always admit a solution."""
    if area is None:
        return {"domain": "plane", "existence_satisfied": True}
    rep = check_existence(params, area, spec.counts())
    return {
        "domain": "torus",
        "area": area,
        "existence_satisfied": rep.satisfied,
        "aggregate_bound": rep.aggregate_bound,
        "critical_area": critical_area(params, spec.counts()),
        "n": spec.counts().array.astype(int),
        "bound": rep.bounds,
        "margin": rep.margins,
        "q": rep.q,
        "alpha_sign": rep.alpha_signs,
    }


def _area(cfg: RunConfig) -> float | None:
    return float(np.prod(cfg.periods)) if cfg.domain == "torus" else None


def _options(cfg: RunConfig) -> T.SolveOptions:
    return T.SolveOptions(tol_rel=cfg.tol_rel, max_iter=cfg.max_iter, seed=cfg.seed, init=cfg.init)


def cmd_check(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    spec = cfg.vortex_spec()
    record = existence_record(cfg.params, spec, _area(cfg))
    if cfg.domain == "torus":
        n = spec.counts().array.astype(int)
        print(f"torus |Omega| = {record['area']:.6g}, n = {n.tolist()}", file=out)
        for i in range(cfg.params.N):
            print(
                f"  species {i + 1}: n_i = {n[i]}  bound = {record['bound'][i]:.6g}"
                f"  margin = {record['margin'][i]:.6g}  q_i = {record['q'][i]:.6g}",
                file=out,
            )
        print(f"  critical area = {record['critical_area']:.6g}", file=out)
    verdict = "satisfied" if record["existence_satisfied"] else "violated"
    print(f"existence condition {verdict}", file=out)
    if cfg.report_path:
        write_report(cfg.report_path, record)
    return EXIT_OK if record["existence_satisfied"] else EXIT_UNSATISFIED


def solve_config(cfg: RunConfig, force: bool = False):
    """Run the solver a config describes. Returns ``(record, grid, fields)``."""
    spec = cfg.vortex_spec()
    params = cfg.params
    record = existence_record(params, spec, _area(cfg))
    if cfg.domain == "torus":
        problem = T.build_torus_problem(params, spec, cfg.resolution, cfg.sigma)
        v, rep = T.minimize(problem, _options(cfg), force=force)
        u = T.recover_u(problem, v)
        obs = compute_observables(u, spec, problem.grid, params, normalized=False, sources=problem.sources)
        u0 = problem.background.samples
        decay = float("nan")
        extra = {"constraint_residual": rep.constraint_residuals, "sigma": problem.background.mollifier_sigma}
    else:
        problem = P.build_plane_problem(params, spec, cfg.resolution, cfg.half_width, cfg.mu)
        v, rep = P.minimize_plane(problem, _options(cfg))
        u = P.recover_u(problem, v)
        obs = compute_observables(u, spec, problem.grid, params, normalized=True)
        u0 = problem.u0
        L = problem.grid.half_width
        try:
            fit = P.fit_decay(u, problem.grid, (4.0, 0.6 * L), center=spec.all_points().mean(axis=0))
            decay = fit.rate
        except ValueError:
            decay = float("nan")
        # sign diagnostic: u_i <= 0 is guaranteed only when e^2 <= g^2 / N
        extra = {"mu": problem.mu, "half_width": L, "max_u": u.max(axis=(1, 2))}
    record = {
        "converged": rep.converged,
        "status": rep.status,
        "iterations": rep.iterations,
        "grad_norm": rep.grad_norm,
        "tolerance": rep.tolerance,
        "functional": rep.functional_value,
        "flux": obs.flux,
        "flux_error": rep.flux_errors,
        "tension": obs.tension,
        "decay_rate": decay,
        "residual": obs.residual_S,
        "mean_drift": rep.mean_drift,
        **extra,
        **record,
        "wall_time": rep.wall_time,
    }
    fields = {
        "u": u,
        "v": v,
        "u0": u0,
        "B12": obs.B12,
        "phi_abs": obs.phi_abs,
        "covariant_density": obs.covariant_density,
    }
    return record, problem.grid, fields


def cmd_solve(cfg: RunConfig, force: bool = False, csv: bool = False, out=None) -> int:
    out = out or sys.stdout
    spec = cfg.vortex_spec()
    if cfg.domain == "torus":
        verdict = existence_record(cfg.params, spec, _area(cfg))
        if not verdict["existence_satisfied"] and not force:
            print("existence condition violated; refusing to solve (use --force to try anyway)", file=out)
            print(format_report(verdict), end="", file=out)
            return EXIT_UNSATISFIED
    record, grid, fields = solve_config(cfg, force=force)
    if cfg.fields_path:
        write_fields(cfg.fields_path, grid, fields)
        if csv:
            write_csv(cfg.fields_path, grid, fields)
    if cfg.report_path:
        write_report(cfg.report_path, record)
    print(format_report(record), end="", file=out)
    return EXIT_OK if record["converged"] else EXIT_NOT_CONVERGED


def sweep_values(cfg: RunConfig) -> np.ndarray:
    sw = cfg.sweep
    if sw.axis == "area":
        return np.linspace(sw.start, sw.stop, sw.points)
    return np.unique(np.round(np.linspace(sw.start, sw.stop, sw.points)).astype(int))


def sweep_point_config(cfg: RunConfig, value) -> RunConfig:
    """The torus configuration at one sweep value."""
    sw = cfg.sweep
    if sw.axis == "area":
        s = np.sqrt(value / np.prod(cfg.periods))
        periods = (cfg.periods[0] * s, cfg.periods[1] * s)
        vortices = [[(x * s, y * s) for x, y in pts] for pts in cfg.vortices]
        return replace(cfg, periods=periods, vortices=vortices)
    k = sw.species - 1
    anchor = cfg.vortices[k][0] if cfg.vortices[k] else (0.5 * cfg.periods[0], 0.5 * cfg.periods[1])
    vortices = [list(pts) for pts in cfg.vortices]
    vortices[k] = [anchor] * int(value)
    return replace(cfg, vortices=vortices)


def run_sweep_point(cfg: RunConfig, index: int, value) -> dict:
    point = sweep_point_config(cfg, value)
    spec = point.vortex_spec()
    area = float(np.prod(point.periods))
    verdict = check_existence(point.params, area, spec.counts())
    problem = T.build_torus_problem(point.params, spec, point.resolution, point.sigma)
    v, rep = T.minimize(problem, _options(point), force=True)
    w_mean = problem.factors.apply_Tt(rep.mean_drift)
    record = {
        "index": index,
        "value": float(value),
        "area": area,
        "analytic_satisfied": verdict.satisfied,
        "q_min": float(verdict.q.min()),
        "converged": rep.converged,
        "status": rep.status,
        "iterations": rep.iterations,
        "drift": rep.mean_drift,
        "w_drift": w_mean,
    }
    if cfg.report_path:
        base = Path(cfg.report_path)
        write_report(base.with_name(f"{base.name}.point{index:03d}"), record)
    return record


def frontier(values, converged) -> dict:
    """Bracket of the convergence frontier: the adjacent sweep values where the outcome flips."""
    values = np.asarray(values, dtype=float)
    converged = np.asarray(converged, dtype=bool)
    flips = np.nonzero(converged[1:] != converged[:-1])[0]
    if len(flips) == 0:
        return {"frontier_found": False, "frontier_lo": float("nan"), "frontier_hi": float("nan"), "monotone": True}
    j = flips[0]
    return {
        "frontier_found": True,
        "frontier_lo": float(values[j]),
        "frontier_hi": float(values[j + 1]),
        "monotone": len(flips) == 1,
    }


def sweep_config(cfg: RunConfig) -> dict:
    values = sweep_values(cfg)
    workers = max(1, cfg.sweep.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_sweep_point, cfg, i, val) for i, val in enumerate(values)]
            points = [f.result() for f in futures]
    else:
        points = [run_sweep_point(cfg, i, val) for i, val in enumerate(values)]
    points.sort(key=lambda p: p["index"])
    converged = [p["converged"] for p in points]
    table = {
        "axis": cfg.sweep.axis,
        "points": len(points),
        "value": [p["value"] for p in points],
        "analytic_satisfied": [p["analytic_satisfied"] for p in points],
        "converged": converged,
        "iterations": [p["iterations"] for p in points],
        "q_min": [p["q_min"] for p in points],
        "max_abs_drift": [float(np.max(np.abs(p["drift"]))) for p in points],
    }
    table.update(frontier(values, converged))
    if cfg.sweep.axis == "area":
        table["analytic_threshold"] = critical_area(cfg.params, cfg.vortex_spec().counts())
    else:
        table.update({f"analytic_{k}": v for k, v in frontier(values, table["analytic_satisfied"]).items()})
    if table["frontier_found"] and cfg.sweep.axis == "area":
        table["brackets_analytic"] = table["frontier_lo"] <= table["analytic_threshold"] <= table["frontier_hi"]
    return {"table": table, "points": points}


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    result = sweep_config(cfg)
    for p in result["points"]:
        print(
            f"[{p['index']:3d}] value = {p['value']:.6g}  analytic = {'yes' if p['analytic_satisfied'] else 'no'}"
            f"  outcome = {p['status']}  iterations = {p['iterations']}"
            f"  drift = {np.array2string(np.asarray(p['drift']), precision=3)}",
            file=out,
        )
    table = result["table"]
    if cfg.report_path:
        write_report(cfg.report_path, table)
    print(format_report(table), end="", file=out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig | None = None, mutate: str | None = None, out=None) -> int:
    out = out or sys.stdout
    results = V.run_all(mutate=mutate)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}", file=out)
    ok = all(bool(r[1]) for r in results)
    if cfg is not None and cfg.report_path:
        write_report(cfg.report_path, {name.replace(" ", "_"): bool(p) for name, p, _ in results})
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpsvortex", description="Multi-species BPS vortex solver.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", help="evaluate the existence condition")
    p.add_argument("config")
    p = sub.add_parser("solve", help="solve on the torus or in the plane")
    p.add_argument("config")
    p.add_argument("--force", action="store_true", help="attempt a torus solve even if the existence condition fails")
    p.add_argument("--csv", action="store_true", help="also write one x,y,value CSV per field")
    p = sub.add_parser("sweep", help="scan the existence threshold")
    p.add_argument("config")
    p = sub.add_parser("verify", help="run the self-check suite")
    p.add_argument("config", nargs="?")
    p.add_argument("--mutate", choices=V.MUTATIONS, help=argparse.SUPPRESS)
    p = sub.add_parser("run", help="dispatch on the config's [run] mode")
    p.add_argument("config")
    p.add_argument("--force", action="store_true")
    p.add_argument("--csv", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    command = args.command
    if command == "run":
        command = {"check": "check", "solve-torus": "solve", "solve-plane": "solve",
                   "sweep-threshold": "sweep", "verify": "verify"}[cfg.mode]
    if command == "sweep" and (cfg.sweep is None or cfg.domain != "torus"):
        print("config error: sweeps need a [sweep] section and a torus domain", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if command == "check":
            return cmd_check(cfg)
        if command == "solve":
            return cmd_solve(cfg, force=args.force, csv=args.csv)
        if command == "sweep":
            return cmd_sweep(cfg)
        return cmd_verify(cfg, getattr(args, "mutate", None))
    except ValueError as exc:
        # invalid physical setup discovered while assembling a problem (box too small, mu too small, ...)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
