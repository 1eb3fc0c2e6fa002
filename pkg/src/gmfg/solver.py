"""The outer graphon mean field game fixed point.

One Picard pass maps a measure ensemble to per-vertex best responses, then
to the closed-loop particle propagation those responses induce, then back to
the new ensemble of time marginals. Common random numbers across passes make
the map deterministic, so the iteration trace exposes the contraction rate
directly. A sensitivity probe estimates the two constants whose product
governs that rate.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .control import frozen_fields, solve_hjb
from .errors import ConfigError, ConvergenceError, InvariantError, NumericalError
from .graphon import VertexGrid
from .measures import (MeasureEnsemble, PathBundle, ensemble_distance,
                       ensemble_w1_sup, marginals)


class GMFGProblem:
    """A full game instance: data, graphon, initial law, grids, seeds."""

    def __init__(self, functions, graphon, initial_law, M, K, N_x=201,
                 n_u=101, R=5000, seed=0, domain=None, domain_padding=0.0,
                 compress_q=128):
        if R < 100:
            raise InvariantError("particle count R must be at least 100")
        self.functions = functions
        self.graphon = graphon
        self.initial_law = initial_law
        self.M = int(M)
        self.K = int(K)
        self.N_x = int(N_x)
        self.n_u = int(n_u)
        self.R = int(R)
        self.seed = int(seed)
        self.compress_q = int(compress_q)
        self.vertex_grid = VertexGrid(M)
        self.times = np.linspace(0.0, functions.T, self.K + 1)
        if domain is None:
            domain = self._default_domain(domain_padding)
        self.x_grid = np.linspace(float(domain[0]), float(domain[1]), self.N_x)

    def _default_domain(self, extra):
        # Initial support widened by the diffusion cone and a drift-range
        # estimate; bounded drift keeps the mass inside.
        p = self.functions
        lo = float(self.initial_law.atoms.min())
        hi = float(self.initial_law.atoms.max())
        pad = 6.0 * p.sigma * math.sqrt(p.T) + self._drift_range() * p.T + float(extra)
        return lo - pad, hi + pad

    def _drift_range(self):
        p = self.functions
        umax = max(abs(p.u_min), abs(p.u_max))
        span = np.linspace(-2.0, 2.0, 17)
        xg, yg = np.meshgrid(span, span)
        if p.is_structured:
            s = p.structured_parts
            coef = np.abs(np.broadcast_to(s["f0"](xg, yg), xg.shape)) \
                + np.abs(np.broadcast_to(s["f"](xg, yg), xg.shape))
            return float(coef.max() * umax)
        best = 0.0
        for u in (p.u_min, 0.5 * (p.u_min + p.u_max), p.u_max):
            g = p.generic_parts
            val = np.abs(np.broadcast_to(g["f0"](xg, u, yg), xg.shape)) \
                + np.abs(np.broadcast_to(g["f"](xg, u, yg), xg.shape))
            best = max(best, float(val.max()))
        return best

    @property
    def noise_floor(self):
        return 3.0 / math.sqrt(self.R)


@dataclass
class GMFGSolution:
    """Converged (or partial) solution of the fixed point."""

    value_grids: list
    policies: list
    ensemble: MeasureEnsemble
    bundle: PathBundle
    trace: list
    converged: bool
    tol: float
    noise_floor: float
    problem: GMFGProblem = None

    def policy_table(self):
        return np.stack([p.values for p in self.policies])


def _vertex_noise(problem, v):
    return rng.stream(problem.seed, rng.PROPAGATE, v).standard_normal((problem.R, problem.K))


def _vertex_initials(problem, v):
    u = rng.stream(problem.seed, rng.INITIAL, v).random(problem.R)
    return problem.initial_law.quantile(u)


def zero_drift_bundle(problem):
    """Pure-diffusion propagation of the initial law (the starting iterate)."""
    paths = np.empty((problem.M, problem.R, problem.K + 1))
    dt = problem.functions.T / problem.K
    root_dt = math.sqrt(dt)
    for v in range(problem.M):
        steps = problem.functions.sigma * root_dt * _vertex_noise(problem, v)
        paths[v, :, 0] = _vertex_initials(problem, v)
        paths[v, :, 1:] = paths[v, :, 0:1] + np.cumsum(steps, axis=1)
    return PathBundle(paths, problem.times, {"seed": problem.seed, "kind": "zero_drift"})


def propagate_closed_loop(problem, policies, e_drift, fields=None):
    """Closed-loop Euler-Maruyama propagation of every vertex population.

    Per vertex, R particles start from i.i.d. draws of the initial law and
    follow the measure-coupled drift evaluated against ``e_drift`` with the
    vertex policy in the control slot. Noise and initial draws are keyed by
    (seed, vertex, replica), so repeated calls couple exactly.
    """
    p = problem.functions
    dt = p.T / problem.K
    root_dt = math.sqrt(dt)
    paths = np.empty((problem.M, problem.R, problem.K + 1))
    for v in range(problem.M):
        fl = fields[v] if fields is not None else frozen_fields(
            p, problem.graphon, problem.vertex_grid.midpoints[v], e_drift,
            problem.x_grid, problem.compress_q, drift_only=True)
        noise = _vertex_noise(problem, v)
        x = _vertex_initials(problem, v).astype(float)
        paths[v, :, 0] = x
        for k in range(problem.K):
            u = policies[v].eval_index(k, x)
            x = x + fl.drift(k, x, u) * dt + p.sigma * root_dt * noise[:, k]
            paths[v, :, k + 1] = x
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"propagation diverged at vertex {v}")
    return PathBundle(paths, problem.times, {"seed": problem.seed, "kind": "closed_loop"})


def inner_mv_consistency(problem, policies, e_start, tol_inner=None,
                         max_inner=60):
    """Self-consistent propagation under fixed policies.

    Iterates drift-ensemble updates nu <- marginals(propagate(policies, nu))
    until the sup W1 change drops below ``tol_inner``. With policies fixed
    this map contracts on any horizon window, so geometric decay of the
    change is the expected trace shape. Returns (bundle, ensemble, trace).
    """
    if tol_inner is None:
        tol_inner = max(1e-4, 0.2 * problem.noise_floor)
    ens = e_start
    trace = []
    for j in range(max_inner):
        bundle = propagate_closed_loop(problem, policies, ens)
        new = marginals(bundle)
        d = ensemble_w1_sup(new, ens)
        trace.append(d)
        ens = new
        if d < tol_inner:
            return bundle, ens, trace
    raise ConvergenceError(
        f"measure consistency stalled above {tol_inner:.3g} after {max_inner} passes",
        trace=trace)


def _solve_all_vertices(problem, ensemble, threads=1):
    grid = problem.vertex_grid

    def solve_one(v):
        fl = frozen_fields(problem.functions, problem.graphon, grid.midpoints[v],
                           ensemble, problem.x_grid, problem.compress_q)
        vg, pol = solve_hjb(problem.functions, problem.graphon, grid.midpoints[v],
                            ensemble, problem.x_grid, problem.n_u, fields=fl)
        return vg, pol, fl

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_one, range(problem.M)))
    else:
        results = [solve_one(v) for v in range(problem.M)]
    vgs = [r[0] for r in results]
    pols = [r[1] for r in results]
    fls = [r[2] for r in results]
    return vgs, pols, fls


def picard_solve(problem, tol=None, max_outer=30, mode="single_loop",
                 min_outer=2, inner_tol=None, threads=1):
    """Fixed-point iteration of the full game map.

    Starting from the zero-drift propagation marginals, each pass solves the
    vertex value equations against the current ensemble, propagates the
    closed loop (directly in ``single_loop`` mode, through the inner
    measure-consistency sub-iteration in ``double_loop`` mode), and measures
    the sup-over-(vertex, time) W1 change. Particle noise cannot resolve
    ensembles below the sampling floor, so the tolerance is clamped to
    5 / sqrt(R). Non-convergence raises with the trace attached, so callers
    can inspect an empirical ratio at or above one.
    """
    if mode not in ("single_loop", "double_loop"):
        raise ConfigError(f"unknown mode {mode!r}")
    floor = problem.noise_floor
    tol_eff = max(tol if tol is not None else 0.0, 5.0 / math.sqrt(problem.R))
    ens = marginals(zero_drift_bundle(problem))
    trace = []
    prev_policy = None
    bundle = None
    for i in range(max_outer):
        vgs, pols, fls = _solve_all_vertices(problem, ens, threads)
        if mode == "single_loop":
            bundle = propagate_closed_loop(problem, pols, ens, fields=fls)
        else:
            bundle, _, _ = inner_mv_consistency(problem, pols, ens, inner_tol)
        new = marginals(bundle)
        d = ensemble_w1_sup(new, ens)
        pol_table = np.stack([p.values for p in pols])
        pol_delta = float(np.abs(pol_table - prev_policy).max()) if prev_policy is not None else math.nan
        entry = {
            "iteration": i,
            "distance": d,
            "ratio": d / trace[-1]["distance"] if trace and trace[-1]["distance"] > 0 else math.nan,
            "policy_delta": pol_delta,
        }
        trace.append(entry)
        prev_policy = pol_table
        ens = new
        if d < tol_eff and i + 1 >= min_outer:
            return GMFGSolution(vgs, pols, ens, bundle, trace, True, tol_eff,
                                floor, problem)
    raise ConvergenceError(
        f"no contraction below {tol_eff:.3g} within {max_outer} passes", trace=trace)


def extra_iteration_distance(problem, solution, threads=1):
    """Ensemble change produced by one more full pass from a solution."""
    _, pols, fls = _solve_all_vertices(problem, solution.ensemble, threads)
    bundle = propagate_closed_loop(problem, pols, solution.ensemble, fields=fls)
    return ensemble_w1_sup(marginals(bundle), solution.ensemble)


@dataclass
class SensitivityReport:
    """Local estimates of the response constants at one solution."""

    c1: float
    c2: float
    policy_change: float
    ensemble_shift: float
    inner_traces: tuple = field(default=())

    @property
    def product(self):
        return self.c1 * self.c2

    @property
    def defined(self):
        return math.isfinite(self.c1) and math.isfinite(self.c2)


def sensitivity_probe(problem, solution, delta=0.05, threads=1, tol_inner=None):
    """Finite-difference probe of the fixed-point contraction constants.

    Shifts every ensemble atom by ``delta`` (a location shift moves the
    path ensemble by exactly min(delta, 1) under the synchronous coupling),
    re-solves the best responses, and reports

    * c1: sup-norm policy change divided by the ensemble shift, and
    * c2: coupled-propagation ensemble distance divided by the policy
      change, with both policy sets propagated to measure consistency
      under common noise.

    A zero denominator leaves the corresponding estimate undefined (NaN).
    """
    shifted = solution.ensemble.shift(delta)
    _, pols_shifted, _ = _solve_all_vertices(problem, shifted, threads)
    base_table = solution.policy_table()
    new_table = np.stack([p.values for p in pols_shifted])
    dphi = float(np.abs(new_table - base_table).max())
    shift_dist = min(abs(float(delta)), 1.0)
    c1 = dphi / shift_dist if shift_dist > 0 else math.nan

    if dphi <= 0.0:
        return SensitivityReport(c1, math.nan, dphi, shift_dist)
    b1, _, t1 = inner_mv_consistency(problem, solution.policies, solution.ensemble, tol_inner)
    b2, _, t2 = inner_mv_consistency(problem, pols_shifted, solution.ensemble, tol_inner)
    c2 = ensemble_distance(b1, b2) / dphi
    return SensitivityReport(c1, c2, dphi, shift_dist, (t1, t2))
