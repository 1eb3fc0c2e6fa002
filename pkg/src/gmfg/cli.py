"""Command-line front end.

    gmfg solve-lq       --config FILE --out DIR
    gmfg solve-gmfg     --config FILE --out DIR [--threads N]
    gmfg simulate-enash --config FILE --out DIR [--dump-paths]
    gmfg graphon-diag   --config FILE --out DIR

Outputs are machine-readable: CSV (RFC 4180 body after '#' metadata lines)
and JSON with stable key order. Reruns with the same config and seed are
byte-identical; wall-clock timings are only emitted when GMFG_TIMING=1.
Exit codes: 0 success, 1 input error, 2 convergence failure (trace written).
"""

import argparse
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, ConvergenceError
from .graphon import (cell_average_step, cut_norm_grid_bound, h11_deviation,
                      sample_step_graphon, step_difference)
from .lq import solve_lq_fixed_point
from .population import run_ladder, run_system_a, build_population
from .scenario import parse_scenario
from .solver import picard_solve

_FMT = "%.17g"


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FMT % float(value)


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _meta_lines(scenario):
    return [f"# scenario_hash={scenario.hash}",
            f"# artifact_version={__version__}"]


def write_csv(path, scenario, header, rows):
    buf = io.StringIO()
    for line in _meta_lines(scenario):
        buf.write(line + "\r\n")
    buf.write(",".join(header) + "\r\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\r\n")
    _atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path, scenario, payload):
    doc = {"meta": {"scenario_hash": scenario.hash,
                    "artifact_version": __version__}}
    doc.update(_jsonable(payload))
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _maybe_time(started):
    if os.environ.get("GMFG_TIMING") == "1":
        return {"wall_time": time.time() - started}
    return {}


# -- subcommands -------------------------------------------------------------

def cmd_solve_lq(scenario, out_dir, args):
    started = time.time()
    p = scenario.build_lq()
    sol = solve_lq_fixed_point(p, tol=scenario.lq_tol)
    n = p.n
    rows = []
    for k, t in enumerate(p.times):
        for i in range(n):
            for j in range(n):
                rows.append([k, t, i, j, sol.riccati.Pi[k, i, j]])
    write_csv(os.path.join(out_dir, "riccati.csv"), scenario,
              ["t_index", "time", "row", "col", "pi"], rows)
    rows = []
    for v in range(p.M):
        for k in range(p.K + 1):
            for c in range(n):
                rows.append([v, k, c, sol.xbar[v, k, c], sol.s[v, k, c]])
    write_csv(os.path.join(out_dir, "meanfield.csv"), scenario,
              ["vertex_index", "time_index", "component", "xbar", "s"], rows)
    write_json(os.path.join(out_dir, "gains.json"), scenario, {
        "feedback_gain": sol.feedback_gain,
        "feedback_offset": sol.feedback_offset,
        "note": "control = -gain[t] x - offset[vertex, t]",
    })
    diag = {"c_lambda": sol.c_lambda, "iterations": sol.iterations,
            "residual": sol.residual, "changes": sol.changes}
    diag.update(_maybe_time(started))
    write_json(os.path.join(out_dir, "diagnostics.json"), scenario, diag)
    return 0


def cmd_solve_gmfg(scenario, out_dir, args):
    started = time.time()
    problem = scenario.build_problem()
    threads = args.threads or 0
    if threads == 0:
        threads = min(4, os.cpu_count() or 1)
    try:
        sol = picard_solve(problem, tol=scenario.picard_tol,
                           max_outer=scenario.max_outer, mode=scenario.mode,
                           min_outer=scenario.min_outer,
                           inner_tol=scenario.inner_tol, threads=threads)
    except ConvergenceError as exc:
        payload = {"converged": False, "trace": exc.trace,
                   "error": str(exc)}
        payload.update(_maybe_time(started))
        write_json(os.path.join(out_dir, "trace.json"), scenario, payload)
        print(f"solve-gmfg: {exc}", file=sys.stderr)
        return 2
    comp = sol.ensemble.compress(scenario.output_atoms)
    rows = []
    for v in range(comp.n_vertices):
        for k in range(comp.n_times):
            for a, w in zip(comp.atoms[v, k], comp.weights[v, k]):
                rows.append([v, k, a, w])
    write_csv(os.path.join(out_dir, "ensemble.csv"), scenario,
              ["vertex_index", "time_index", "atom", "weight"], rows)
    for v, pol in enumerate(sol.policies):
        rows = [[k, j, pol.values[k, j]]
                for k in range(pol.values.shape[0])
                for j in range(pol.values.shape[1])]
        write_csv(os.path.join(out_dir, f"policy_{v:03d}.csv"), scenario,
                  ["t_index", "x_index", "value"], rows)
    payload = {"converged": True, "trace": sol.trace, "tolerance": sol.tol,
               "noise_floor": sol.noise_floor}
    payload.update(_maybe_time(started))
    write_json(os.path.join(out_dir, "trace.json"), scenario, payload)
    return 0


def cmd_simulate_enash(scenario, out_dir, args):
    started = time.time()
    if scenario.kind != "nonlinear":
        raise ConfigError("simulate-enash needs a nonlinear scenario")
    ladder = [(mk, sz) for mk, sz in scenario.rungs]
    if args.ladder:
        try:
            ladder = [tuple(int(v) for v in rung.split(":"))
                      for rung in args.ladder.split(",")]
            assert all(len(r) == 2 for r in ladder)
        except (ValueError, AssertionError):
            raise ConfigError("--ladder must look like 2:25,4:50,8:100")
    results = run_ladder(scenario.build_problem, ladder,
                         n_reps=scenario.replications, tol=scenario.picard_tol,
                         iota=scenario.deviator,
                         solver_kwargs={"max_outer": scenario.max_outer,
                                        "min_outer": scenario.min_outer},
                         R_law=scenario.R_law,
                         with_perturbations=args.perturbations)
    payload = {"rungs": results, "deviator": scenario.deviator,
               "replications": scenario.replications}
    payload.update(_maybe_time(started))
    write_json(os.path.join(out_dir, "report.json"), scenario, payload)
    if args.dump_paths:
        for rung in ladder:
            mk, sz = rung
            problem = scenario.build_problem(M=mk)
            from .solver import picard_solve as _ps
            sol = _ps(problem, tol=scenario.picard_tol,
                      max_outer=scenario.max_outer, min_outer=scenario.min_outer)
            pop = build_population(problem.graphon, mk, [sz] * mk,
                                   problem.initial_law, seed=problem.seed + 7919)
            ts = run_system_a(pop, sol)
            rows = [[i, k, ts.paths[i, k]]
                    for i in range(pop.N) for k in range(problem.K + 1)]
            write_csv(os.path.join(out_dir, f"trajectories_M{mk}.csv"), scenario,
                      ["agent", "time_index", "value"], rows)
    return 0


def cmd_graphon_diag(scenario, out_dir, args):
    diag = scenario.raw.get("diagnostics") or {}
    m_values = diag.get("m_values", [4, 8, 16, 32])
    refinement = int(diag.get("refinement", 8))
    g = scenario.graphon
    rows = []
    for M in m_values:
        sampled = sample_step_graphon(g, int(M))
        averaged = cell_average_step(g, int(M), refinement)
        dev = h11_deviation(sampled, g, refinement)
        cut = cut_norm_grid_bound(step_difference(sampled, averaged),
                                  seed=scenario.seed)
        rows.append([int(M), dev, cut])
        mat_rows = [[i, j, sampled.matrix[i, j]]
                    for i in range(int(M)) for j in range(int(M))]
        write_csv(os.path.join(out_dir, f"step_M{int(M)}.csv"), scenario,
                  ["row", "col", "weight"], mat_rows)
    write_csv(os.path.join(out_dir, "h11.csv"), scenario,
              ["M", "h11_deviation", "cut_norm_bound"], rows)
    return 0


_COMMANDS = {
    "solve-lq": cmd_solve_lq,
    "solve-gmfg": cmd_solve_gmfg,
    "simulate-enash": cmd_simulate_enash,
    "graphon-diag": cmd_graphon_diag,
}


def dispatch(command, scenario, out_dir, args):
    """Run one subcommand; outputs are written atomically into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    return _COMMANDS[command](scenario, out_dir, args)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gmfg",
        description="Graphon mean field game solvers and population experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve-lq", "closed-form linear-quadratic solve"),
            ("solve-gmfg", "fixed-point solve of the nonlinear game"),
            ("simulate-enash", "finite-population approximate-Nash ladder"),
            ("graphon-diag", "graphon discretization diagnostics")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="scenario JSON file")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--threads", type=int, default=0,
                         help="worker cap for per-vertex solves (0 = auto)")
        if name == "simulate-enash":
            cmd.add_argument("--dump-paths", action="store_true",
                             help="also write System A trajectories per rung")
            cmd.add_argument("--ladder", default=None,
                             help="override rungs, e.g. 2:25,4:50,8:100")
            cmd.add_argument("--perturbations", action="store_true",
                             help="include drift/cost perturbation estimates")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    seed_override = os.environ.get("GMFG_SEED")
    try:
        scenario = parse_scenario(args.config,
                                  seed_override=int(seed_override)
                                  if seed_override else None)
        return dispatch(args.command, scenario, args.out, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"gmfg: {problem}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"gmfg: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"gmfg: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
