"""Scenario files: JSON in, validated problem objects out.

A scenario bundles the problem data (nonlinear structured coefficients or
LQ matrices), the graphon, grid sizes, seeds, tolerances, and an optional
population ladder. Validation walks the whole document and reports every
violation at once with its field path.
"""

import hashlib
import json

import numpy as np

from . import graphon as graphon_mod
from .control import ProblemFunctions
from .errors import ConfigError
from .lq import LQParams
from .measures import Measure1D, dirac, normal_quantile_measure
from .solver import GMFGProblem

_EXPR_KEYS = ("const", "x", "y", "xx", "xy", "yy")


def _finite(value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        return None
    return v if np.isfinite(v) else None


class _Checker:
    def __init__(self):
        self.problems = []

    def fail(self, path, msg):
        self.problems.append(f"{path}: {msg}")

    def number(self, obj, path, *, positive=False, default=None):
        if obj is None:
            if default is not None:
                return default
            self.fail(path, "missing number")
            return 0.0
        v = _finite(obj)
        if v is None:
            self.fail(path, "must be a finite number")
            return 0.0
        if positive and not v > 0:
            self.fail(path, "must be positive")
        return v

    def integer(self, obj, path, minimum=1, default=None):
        if obj is None and default is not None:
            return default
        if not isinstance(obj, int) or isinstance(obj, bool):
            self.fail(path, "must be an integer")
            return minimum
        if obj < minimum:
            self.fail(path, f"must be at least {minimum}")
            return minimum
        return obj

    def raise_if_failed(self):
        if self.problems:
            raise ConfigError("scenario validation failed:\n  "
                              + "\n  ".join(self.problems), self.problems)


def _poly2_callable(spec, path, check):
    coeffs = {k: check.number(spec.get(k), f"{path}.{k}", default=0.0)
              for k in _EXPR_KEYS}
    clip = spec.get("clip")
    if clip is not None:
        if (not isinstance(clip, (list, tuple)) or len(clip) != 2
                or _finite(clip[0]) is None or _finite(clip[1]) is None
                or not float(clip[0]) < float(clip[1])):
            check.fail(f"{path}.clip", "must be [lo, hi] with lo < hi")
            clip = None
        else:
            clip = (float(clip[0]), float(clip[1]))

    def fn(x, y, c=coeffs, clip=clip):
        out = (c["const"] + c["x"] * x + c["y"] * y + c["xx"] * x**2
               + c["xy"] * x * y + c["yy"] * y**2)
        out = np.broadcast_to(out, np.broadcast_shapes(np.shape(x), np.shape(y)))
        if clip is not None:
            out = np.clip(out, clip[0], clip[1])
        return out

    return fn


def parse_expression(spec, path, check):
    """Coefficient function of (x, y) from a config expression block."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        c = check.number(spec, path)
        return lambda x, y: np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), c)
    if not isinstance(spec, dict):
        check.fail(path, "must be a number or an expression object")
        return lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
    kind = spec.get("kind", "poly2")
    if kind == "constant":
        c = check.number(spec.get("c"), f"{path}.c", default=0.0)
        return lambda x, y: np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), c)
    if kind == "poly2":
        return _poly2_callable(spec, path, check)
    check.fail(path, f"unknown expression kind {kind!r}")
    return lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))


def parse_initial(spec, path, check):
    if not isinstance(spec, dict) or "kind" not in spec:
        check.fail(path, "must be an object with a 'kind'")
        return dirac(0.0)
    kind = spec["kind"]
    if kind == "dirac":
        return dirac(check.number(spec.get("x"), f"{path}.x", default=0.0))
    if kind == "normal":
        mean = check.number(spec.get("mean"), f"{path}.mean", default=0.0)
        std = check.number(spec.get("std"), f"{path}.std", default=1.0)
        atoms = check.integer(spec.get("atoms"), f"{path}.atoms", minimum=1,
                              default=129)
        if std < 0:
            check.fail(f"{path}.std", "must be nonnegative")
            std = 0.0
        return normal_quantile_measure(mean, std, atoms)
    if kind == "atoms":
        atoms = spec.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            check.fail(f"{path}.atoms", "must be a nonempty list")
            return dirac(0.0)
        weights = spec.get("weights")
        try:
            return Measure1D(atoms, weights)
        except Exception as exc:  # surfaced as one aggregated problem
            check.fail(path, str(exc))
            return dirac(0.0)
    check.fail(path, f"unknown initial kind {kind!r}")
    return dirac(0.0)


def parse_graphon(spec, path, check):
    if not isinstance(spec, dict) or "kind" not in spec:
        check.fail(path, "must be an object with a 'kind'")
        return graphon_mod.Graphon.constant(0.0)
    try:
        return graphon_mod.from_config(spec)
    except Exception as exc:
        check.fail(path, str(exc))
        return graphon_mod.Graphon.constant(0.0)


class Scenario:
    """Validated scenario document plus builders for solver objects."""

    def __init__(self, raw):
        check = _Checker()
        self.raw = raw
        self.kind = raw.get("kind")
        if self.kind not in ("nonlinear", "lq"):
            check.fail("kind", "must be 'nonlinear' or 'lq'")
        self.graphon = parse_graphon(raw.get("graphon"), "graphon", check)

        grids = raw.get("grids") or {}
        if not isinstance(grids, dict):
            check.fail("grids", "must be an object")
            grids = {}
        self.M = check.integer(grids.get("M"), "grids.M", default=8)
        self.K = check.integer(grids.get("K"), "grids.K", default=64)
        self.N_x = check.integer(grids.get("N_x"), "grids.N_x", minimum=3, default=201)
        self.N_u = check.integer(grids.get("N_u"), "grids.N_u", minimum=2, default=101)
        self.R = check.integer(grids.get("R"), "grids.R", minimum=100, default=5000)
        self.compress_q = check.integer(grids.get("compress_q"), "grids.compress_q",
                                        minimum=8, default=128)
        self.output_atoms = check.integer(grids.get("output_atoms"),
                                          "grids.output_atoms", minimum=1, default=128)
        self.domain_padding = check.number(grids.get("domain_padding"),
                                           "grids.domain_padding", default=0.0)

        seeds = raw.get("seeds") or {}
        self.seed = check.integer(seeds.get("master") if isinstance(seeds, dict) else None,
                                  "seeds.master", minimum=0, default=0)

        tols = raw.get("tolerances") or {}
        if not isinstance(tols, dict):
            check.fail("tolerances", "must be an object")
            tols = {}
        self.picard_tol = check.number(tols.get("picard_tol"), "tolerances.picard_tol",
                                       positive=True, default=0.05)
        self.max_outer = check.integer(tols.get("max_outer"), "tolerances.max_outer",
                                       default=30)
        self.min_outer = check.integer(tols.get("min_outer"), "tolerances.min_outer",
                                       default=2)
        self.inner_tol = tols.get("inner_tol")
        if self.inner_tol is not None:
            self.inner_tol = check.number(self.inner_tol, "tolerances.inner_tol",
                                          positive=True)
        self.mode = tols.get("mode", "single_loop")
        if self.mode not in ("single_loop", "double_loop"):
            check.fail("tolerances.mode", "must be 'single_loop' or 'double_loop'")
        self.lq_tol = check.number(tols.get("lq_tol"), "tolerances.lq_tol",
                                   positive=True, default=1e-9)

        ladder = raw.get("ladder") or {}
        if not isinstance(ladder, dict):
            check.fail("ladder", "must be an object")
            ladder = {}
        rungs = ladder.get("rungs", [[2, 25], [4, 50], [8, 100]])
        self.rungs = []
        if not isinstance(rungs, list) or not rungs:
            check.fail("ladder.rungs", "must be a nonempty list of [M_k, size]")
        else:
            for i, rung in enumerate(rungs):
                if (not isinstance(rung, (list, tuple)) or len(rung) != 2):
                    check.fail(f"ladder.rungs[{i}]", "must be [M_k, cluster_size]")
                    continue
                mk = check.integer(rung[0], f"ladder.rungs[{i}][0]")
                sz = check.integer(rung[1], f"ladder.rungs[{i}][1]")
                self.rungs.append((mk, sz))
        self.replications = check.integer(ladder.get("replications"),
                                          "ladder.replications", default=20)
        self.deviator = check.integer(ladder.get("deviator"), "ladder.deviator",
                                      minimum=0, default=0)
        self.R_law = check.integer(ladder.get("R_law"), "ladder.R_law",
                                   minimum=100, default=2000)

        problem = raw.get("problem")
        if not isinstance(problem, dict):
            check.fail("problem", "must be an object")
            problem = {}
        self._problem_spec = problem
        if self.kind == "nonlinear":
            self._parse_nonlinear(problem, check)
        elif self.kind == "lq":
            self._parse_lq(problem, check)
        check.raise_if_failed()

    # -- nonlinear ----------------------------------------------------------

    def _parse_nonlinear(self, spec, check):
        form = spec.get("form", "structured")
        if form != "structured":
            check.fail("problem.form", "only the 'structured' form is configurable")
        self.sigma = check.number(spec.get("sigma"), "problem.sigma", positive=True,
                                  default=0.3)
        self.T = check.number(spec.get("T"), "problem.T", positive=True, default=0.5)
        cs = spec.get("control_set", [-1.0, 1.0])
        if (not isinstance(cs, (list, tuple)) or len(cs) != 2
                or _finite(cs[0]) is None or _finite(cs[1]) is None
                or not float(cs[0]) < float(cs[1])):
            check.fail("problem.control_set", "must be [a, b] with a < b")
            cs = (-1.0, 1.0)
        self.control_set = (float(cs[0]), float(cs[1]))
        self._exprs = {name: parse_expression(spec.get(name, 0.0),
                                              f"problem.{name}", check)
                       for name in ("f0", "f", "l1", "l2", "l3", "l4")}
        self.initial = parse_initial(spec.get("initial", {"kind": "dirac", "x": 0.0}),
                                     "problem.initial", check)

    def build_functions(self):
        e = self._exprs
        return ProblemFunctions.structured(e["f0"], e["f"], e["l1"], e["l2"],
                                           e["l3"], e["l4"], self.control_set,
                                           self.sigma, self.T)

    def build_problem(self, M=None):
        if self.kind != "nonlinear":
            raise ConfigError("scenario is not a nonlinear problem")
        return GMFGProblem(self.build_functions(), self.graphon, self.initial,
                           M=M if M is not None else self.M, K=self.K,
                           N_x=self.N_x, n_u=self.N_u, R=self.R, seed=self.seed,
                           domain_padding=self.domain_padding,
                           compress_q=self.compress_q)

    # -- lq -----------------------------------------------------------------

    def _parse_lq(self, spec, check):
        def matrix(name, default=None):
            m = spec.get(name, default)
            if m is None:
                check.fail(f"problem.{name}", "missing matrix")
                return [[0.0]]
            if isinstance(m, (int, float)) and not isinstance(m, bool):
                return [[float(m)]]
            if not isinstance(m, list):
                check.fail(f"problem.{name}", "must be a matrix or scalar")
                return [[0.0]]
            return m

        self._lq_raw = {name: matrix(name) for name in
                        ("A", "B", "D0", "D", "Sigma", "Q", "R", "Q_T")}
        self.gamma0 = check.number(spec.get("gamma0"), "problem.gamma0", default=0.0)
        self.gamma = check.number(spec.get("gamma"), "problem.gamma", default=0.0)
        eta = spec.get("eta", [0.0])
        x0 = spec.get("x0", [0.0])
        self._eta = [eta] if isinstance(eta, (int, float)) else eta
        self._x0 = [x0] if isinstance(x0, (int, float)) else x0
        self.T = check.number(spec.get("T"), "problem.T", positive=True, default=1.0)
        self.R_mc = check.integer(spec.get("R_mc"), "problem.R_mc", minimum=100,
                                  default=10_000)

    def build_lq(self):
        if self.kind != "lq":
            raise ConfigError("scenario is not an LQ problem")
        r = self._lq_raw
        try:
            return LQParams(r["A"], r["B"], r["D0"], r["D"], r["Sigma"], r["Q"],
                            r["R"], r["Q_T"], self.gamma0, self.gamma, self._eta,
                            self._x0, self.T, self.graphon, self.M, self.K)
        except Exception as exc:
            raise ConfigError(f"problem: {exc}", [f"problem: {exc}"]) from exc

    # -- identity -----------------------------------------------------------

    def canonical_json(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


def parse_scenario(path, seed_override=None):
    """Load and validate a scenario file; all violations reported together."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("scenario root must be a JSON object")
    if seed_override is not None:
        if not isinstance(raw.get("seeds"), dict):
            raw["seeds"] = {}
        raw["seeds"]["master"] = int(seed_override)
    return Scenario(raw)
