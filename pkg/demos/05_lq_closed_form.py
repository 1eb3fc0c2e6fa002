"""Linear-quadratic case: the whole game collapses to ODEs plus one operator.

Scalar tracking benchmark on the uniform attachment graphon: one Riccati
path shared by all vertices, fundamental matrices of the closed loop, and a
linear integral operator on the vertex-mean surface. When the operator's
norm bound is below one, Picard iteration converges geometrically and the
resulting feedback is affine per vertex.
"""

import numpy as np

from gmfg import Graphon
from gmfg.lq import (LQParams, lq_consistency_vs_simulation,
                     solve_lq_fixed_point, solve_riccati)

params = LQParams(A=0.0, B=1.0, D0=0.0, D=0.2, Sigma=0.5, Q=1.0, R=1.0,
                  Q_T=0.0, gamma0=0.0, gamma=0.5, eta=[1.0], x0=[1.0], T=1.0,
                  graphon=Graphon.uniform_attachment(), M=16, K=200)

ric = solve_riccati(params)
print("Riccati check: max |Pi(t) - tanh(T - t)| =",
      f"{np.abs(ric.Pi[:, 0, 0] - np.tanh(1.0 - params.times)).max():.2e}")

solution = solve_lq_fixed_point(params, tol=1e-9)
print(f"operator norm bound c_lambda = {solution.c_lambda:.4f} (< 1)")
print(f"fixed point reached in {solution.iterations} passes, "
      f"residual {solution.residual:.1e}")
ratios = [b / a for a, b in zip(solution.changes, solution.changes[1:])
          if a > 1e-13]
print("observed contraction ratios:", [round(r, 4) for r in ratios[:4]])

# Vertex means differ because connectivity scales the tracked signal.
print("\nvertex   xbar(T)    offset s(0)")
for v in (0, 7, 15):
    print(f"{v:>6d}   {solution.xbar[v, -1, 0]:+.4f}    {solution.s[v, 0, 0]:+.4f}")

report = lq_consistency_vs_simulation(params, solution, R_mc=10_000, seed=1)
print("\nMonteCarlo consistency: max |empirical mean - xbar| =",
      f"{report['max_deviation']:.4f}", "inside the CLT band:", report["passed"])
