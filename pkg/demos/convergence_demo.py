"""Chernoff iterates against the exact solution e^{-T} sin x at T = 0.1.

With beta = 1/4 the cutoff layer s(T/n) = (T/n)^{1/4} shrinks slowly and the
error stalls near the edge of the probe region; beta = 1/2 keeps improving.
"""

import numpy as np

from feynman_dirichlet import CutoffFamily, EllipticOperator, Interval, TestFunction, analytic_heat
from feynman_dirichlet import build_extension, convergence_table

dom = Interval(0.0, np.pi)
op = EllipticOperator.constant(1.0)
u0 = TestFunction.sine_series([1.0])
E = build_extension(op, dom)
T = 0.1
n_list = [4, 8, 16, 32, 64, 128]

for beta in (0.5, 0.25):
    fam = CutoffFamily(beta)
    rows = convergence_table(op, dom, fam, E, u0, T, n_list, lambda x: analytic_heat(dom, [1.0], T, x))
    print(f"\nbeta = {beta}  (probes at distance >= {2 * fam.width(T / max(n_list)):.3f})")
    print("    n       h      sup error   bound   seconds")
    for r in rows:
        print(f"{r.n:5d}  {r.h:.4f}  {r.sup_error:10.3e}   {'ok' if r.bound_ok else 'FAIL':5s}  {r.runtime:6.2f}")
