"""Squeezed reflection across the end points of (0, 1) for a drift operator.

Prints the extension at a few collar points next to the reflected interior
value, then shows the one-sided derivative mismatch at x = 0 shrinking with
the finite-difference step.
"""

import numpy as np

from feynman_dirichlet import EllipticOperator, Interval, build_dl_member, build_extension

dom = Interval(0.0, 1.0)
op = EllipticOperator.constant(1.0, [2.0])
E = build_extension(op, dom)
u = build_dl_member(op, dom, seed=5).u
print(f"collar width {E.collar:.4f}")

print("\n    x        Eu(x)      -u(h + 2h^2)")
for h in (0.005, 0.01, 0.02, 0.03):
    ext = float(E.evaluate(u, [[-h]])[0])
    refl = -float(u.value(np.array([[h + 2 * h * h]]))[0])
    print(f"{-h:8.3f}  {ext: .8f}  {refl: .8f}")

f = lambda s: float(E.evaluate(u, [[s]])[0])  # noqa: E731
print("\n  step     |u'(0+) - u'(0-)|   |u''(0+) - u''(0-)|")
for h in (1e-2, 1e-3, 1e-4):
    r = [f(k * h) for k in range(4)]
    l_ = [f(-k * h) for k in range(4)]
    d1 = abs((-3 * r[0] + 4 * r[1] - r[2]) - (3 * l_[0] - 4 * l_[1] + l_[2])) / (2 * h)
    d2 = abs((2 * r[0] - 5 * r[1] + 4 * r[2] - r[3]) - (2 * l_[0] - 5 * l_[1] + 4 * l_[2] - l_[3])) / h**2
    print(f"{h:7.0e}   {d1:14.3e}   {d2:16.3e}")

grid_x = np.linspace(-E.collar, 1 + E.collar, 2001)
vals = E.evaluate(u, grid_x[:, None])
inside = (grid_x >= 0) & (grid_x <= 1)
print(f"\nsup |Eu| outside {np.abs(vals[~inside]).max():.6f} <= sup |u| {np.abs(vals[inside]).max():.6f}")
