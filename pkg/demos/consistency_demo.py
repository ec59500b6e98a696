"""How fast (F_t u - u)/t approaches Lu for the heat/sine problem.

The cutoff exponent beta controls how wide the zeroed boundary layer is;
both values are shown side by side.
"""

from feynman_dirichlet import CutoffFamily, EllipticOperator, Interval, TestFunction, build_extension
from feynman_dirichlet import consistency_residual, grid_step

dom = Interval(0.0, 3.141592653589793)
op = EllipticOperator.constant(1.0)
u = TestFunction.sine_series([1.0])
E = build_extension(op, dom)

print("    t        h      beta=1/2    beta=1/4")
for t in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3):
    r = [consistency_residual(op, dom, CutoffFamily(beta), E, u, t) for beta in (0.5, 0.25)]
    print(f"{t:7.0e}  {grid_step(op, t):.4f}  {r[0]:10.3e}  {r[1]:10.3e}")
