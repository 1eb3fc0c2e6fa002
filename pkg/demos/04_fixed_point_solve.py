"""The full fixed point: ensemble -> best responses -> propagation -> ensemble.

Every agent tracks the running state distribution of its own vertex while
its control authority scales with graphon connectivity. Common random
numbers make each Picard pass deterministic, so the iteration trace shows
the contraction rate directly, and a finite-difference probe estimates the
two sensitivity constants whose product bounds that rate.
"""

import numpy as np

from gmfg import (GMFGProblem, Graphon, ProblemFunctions, holder_modulus,
                  normal_quantile_measure, picard_solve, sensitivity_probe)

shape = lambda *a: np.broadcast_shapes(*(np.shape(v) for v in a))
const = lambda c: (lambda x, y: np.full(shape(x, y), float(c)))

functions = ProblemFunctions.structured(
    const(0.0), const(1.0),                    # drift: c_g(alpha) * u
    lambda x, y: (x - y) ** 2,                 # track the own-vertex field
    const(0.0), const(0.0), const(1.0),        # control cost c_g(alpha) u^2
    control_set=(-1.0, 1.0), sigma=0.3, T=0.5)

problem = GMFGProblem(functions, Graphon.uniform_attachment(),
                      normal_quantile_measure(0.0, 0.3, 129),
                      M=8, K=64, N_x=201, R=4000, seed=7)

solution = picard_solve(problem, tol=0.05, min_outer=5)
print("iteration  distance      ratio")
for entry in solution.trace:
    ratio = "" if np.isnan(entry["ratio"]) else f"{entry['ratio']:.4f}"
    print(f"{entry['iteration']:>9d}  {entry['distance']:.3e}  {ratio}")
print("converged:", solution.converged, " tolerance:", solution.tol,
      " sampling floor:", round(solution.noise_floor, 4))

report = sensitivity_probe(problem, solution, delta=0.05)
print(f"\nsensitivity probe: c1 = {report.c1:.3f}, c2 = {report.c2:.3f}, "
      f"product = {report.product:.3f}")
print("the product bounds the contraction rate the trace exhibits")

c_h, eta = holder_modulus(solution.ensemble)
print(f"\ntime-Holder diagnostic of the converged ensemble: eta = {eta:.3f}")

# Vertices with more connectivity get cheaper control authority; compare the
# terminal spread of the most and least connected vertices.
spread = solution.ensemble.atoms[:, -1, :].std(axis=1)
print("terminal state spread by vertex:", np.round(spread, 4))
