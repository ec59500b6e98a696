"""Three independent values of the heat/sine solution at (t, x) = (0.1, pi/2).

The eigen-expansion is exact, Crank-Nicolson is second order in both steps,
and the killed Euler-Maruyama estimate carries a statistical error and, in
principle, a bias from checking the exit only at time nodes.
"""

import time

import numpy as np

from feynman_dirichlet import EllipticOperator, Interval, McConfig, analytic_heat, crank_nicolson
from feynman_dirichlet import feynman_kac_estimate

dom = Interval(0.0, np.pi)
op = EllipticOperator.constant(1.0)
x, t = np.pi / 2, 0.1


def sine(p):
    return np.sin(p[:, 0])


exact = float(analytic_heat(dom, [1.0], t, x))
print(f"eigen-expansion   {exact:.10f}")
for cells, steps in ((100, 10), (1000, 100), (3142, 1000)):
    cn = float(crank_nicolson(op, dom, sine, t, steps, cells)(x))
    print(f"CN {cells:5d} cells   {cn:.10f}   error {abs(cn - exact):.2e}")

for dt in (1e-3, 1e-4):
    start = time.perf_counter()
    est, se = feynman_kac_estimate(op, dom, sine, t, x, McConfig(paths=100_000, dt=dt, seed=20240611))
    print(f"MC dt={dt:.0e}      {est:.6f} +- {se:.6f}   bias {est - exact:+.2e}   {time.perf_counter() - start:.1f}s")
