"""Second-order elliptic operators ``L = sum a_ij d_i d_j + sum b_i d_i + c``.

No factor 1/2 multiplies the second-order part. Coefficients are vectorised
closures over points of shape ``(m, n)``::

    a(x) -> (m, n, n)    b(x) -> (m, n)    c(x) -> (m,)

Hölder regularity of the coefficients is part of the caller's contract and
is not checked numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AsymmetricMatrix,
    BoundaryConditionViolated,
    CoefficientUnbounded,
    EllipticityViolation,
    MissingDerivatives,
)
from .geometry import Domain, as_points, restore

Field = Callable[[NDArray], NDArray]


@dataclass(frozen=True)
class EllipticOperator:
    dim: int
    a: Field
    b: Field
    c: Field
    ellipticity_lambda: float
    bound_C: float
    grad_a: Field | None = None  # (m, n, n, n), last axis = derivative direction
    grad_b: Field | None = None  # (m, n, n), last axis = derivative direction
    alpha: float = 0.5  # Hölder exponent label, never used numerically

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.ellipticity_lambda > 0 or not self.bound_C > 0:
            raise ValueError("ellipticity constant and coefficient bound must be positive")

    def coefficients(self, x: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
        pts, _ = as_points(x, self.dim)
        m = len(pts)
        A = np.broadcast_to(np.asarray(self.a(pts), dtype=float), (m, self.dim, self.dim))
        b = np.broadcast_to(np.asarray(self.b(pts), dtype=float), (m, self.dim))
        c = np.broadcast_to(np.asarray(self.c(pts), dtype=float), (m,))
        return A, b, c

    @classmethod
    def constant(cls, a, b=None, c=0.0, ellipticity: float | None = None, bound: float | None = None):
        """Operator with constant coefficients; ``a`` may be a scalar in 1D."""
        A = np.atleast_2d(np.asarray(a, dtype=float))
        n = A.shape[0]
        bv = np.zeros(n) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
        cv = float(c)
        if ellipticity is None:
            ellipticity = float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
            if ellipticity <= 0:
                raise ValueError("constant matrix is not positive definite")
        if bound is None:
            bound = max(np.abs(A).max(), np.abs(bv).max(initial=0.0), abs(cv), 1e-300)
        return cls(
            dim=n,
            a=lambda x: np.broadcast_to(A, (len(x), n, n)),
            b=lambda x: np.broadcast_to(bv, (len(x), n)),
            c=lambda x: np.full(len(x), cv),
            ellipticity_lambda=float(ellipticity),
            bound_C=float(bound),
            grad_a=lambda x: np.zeros((len(x), n, n, n)),
            grad_b=lambda x: np.zeros((len(x), n, n)),
        )


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Smooth function with analytic gradient and (optionally) Hessian.

    Closures take points ``(m, n)`` and return ``(m,)``, ``(m, n)`` and
    ``(m, n, n)``. Sums and products follow the usual differentiation rules.
    """

    __test__ = False  # keep pytest from collecting this class

    dim: int
    value: Field
    gradient: Field
    hessian: Field | None = None

    def __call__(self, x: ArrayLike):
        pts, single = as_points(x, self.dim)
        return restore(np.asarray(self.value(pts), dtype=float), single)

    def jet(self, pts: NDArray):
        if self.hessian is None:
            raise MissingDerivatives("test function has no Hessian")
        return self.value(pts), self.gradient(pts), self.hessian(pts)

    def __add__(self, other):
        if not isinstance(other, TestFunction):
            return NotImplemented
        h = None
        if self.hessian is not None and other.hessian is not None:
            h = lambda x: self.hessian(x) + other.hessian(x)
        return TestFunction(
            self.dim,
            lambda x: self.value(x) + other.value(x),
            lambda x: self.gradient(x) + other.gradient(x),
            h,
        )

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, TestFunction):
            f, g = self, other
            h = None
            if f.hessian is not None and g.hessian is not None:

                def h(x):
                    fv, fg, fh = f.jet(x)
                    gv, gg, gh = g.jet(x)
                    cross = fg[:, :, None] * gg[:, None, :]
                    return fv[:, None, None] * gh + gv[:, None, None] * fh + cross + np.swapaxes(cross, 1, 2)

            return TestFunction(
                self.dim,
                lambda x: f.value(x) * g.value(x),
                lambda x: f.value(x)[:, None] * g.gradient(x) + g.value(x)[:, None] * f.gradient(x),
                h,
            )
        s = float(other)
        h = None if self.hessian is None else (lambda x: s * self.hessian(x))
        return TestFunction(self.dim, lambda x: s * self.value(x), lambda x: s * self.gradient(x), h)

    __rmul__ = __mul__

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "TestFunction":
        return cls(
            dim,
            lambda x: np.zeros(len(x)),
            lambda x: np.zeros((len(x), dim)),
            lambda x: np.zeros((len(x), dim, dim)),
        )

    @classmethod
    def sine_series(cls, coefficients: ArrayLike, lo: float = 0.0, hi: float = np.pi) -> "TestFunction":
        """``sum_k c_k sin(k pi (x - lo) / (hi - lo))`` for ``k = 1, 2, ...``."""
        ck = np.asarray(coefficients, dtype=float)
        w = np.pi * np.arange(1, len(ck) + 1) / (hi - lo)

        def phase(x):
            return np.outer(x[:, 0] - lo, w)

        return cls(
            1,
            lambda x: np.sin(phase(x)) @ ck,
            lambda x: (np.cos(phase(x)) @ (ck * w))[:, None],
            lambda x: (-np.sin(phase(x)) @ (ck * w**2))[:, None, None],
        )

    @classmethod
    def polynomial(cls, terms: Mapping[tuple[int, ...], float]) -> "TestFunction":
        """Polynomial ``sum coef * prod x_i**e_i`` keyed by exponent tuples."""
        exps = np.array(list(terms.keys()), dtype=int).reshape(len(terms), -1)
        coef = np.array(list(terms.values()), dtype=float)
        n = exps.shape[1]

        def mono(x, e):
            # x: (m, n), e: (T, n) with possibly negative entries meaning zero
            with np.errstate(divide="ignore", invalid="ignore"):
                p = np.where(e[None] >= 0, x[:, None, :] ** np.maximum(e[None], 0), 0.0)
            return p.prod(axis=2)

        def value(x):
            return mono(x, exps) @ coef

        def gradient(x):
            out = np.empty((len(x), n))
            for i in range(n):
                e = exps.copy()
                e[:, i] -= 1
                out[:, i] = mono(x, e) @ (coef * exps[:, i])
            return out

        def hessian(x):
            out = np.empty((len(x), n, n))
            for i in range(n):
                for j in range(i, n):
                    e = exps.copy()
                    e[:, i] -= 1
                    fac = coef * exps[:, i]
                    fac = fac * e[:, j]
                    e[:, j] -= 1
                    out[:, i, j] = out[:, j, i] = mono(x, e) @ fac
            return out

        return cls(n, value, gradient, hessian)


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class ValidationReport:
    min_eig: float
    symmetry_defect: float
    coefficient_sup: float
    n_samples: int


def validate(op: EllipticOperator, samples: ArrayLike) -> ValidationReport:
    """Check symmetry, ellipticity and boundedness of the coefficients on ``samples``."""
    pts, _ = as_points(samples, op.dim)
    if len(pts) == 0:
        raise ValueError("validation needs at least one sample point")
    A, b, c = op.coefficients(pts)
    norm = np.linalg.norm(A, axis=(1, 2))
    defect = np.linalg.norm(A - np.swapaxes(A, 1, 2), axis=(1, 2))
    bad = defect > 1e-12 * np.maximum(norm, 1e-300)
    if bad.any():
        i = int(np.argmax(bad))
        raise AsymmetricMatrix(pts[i], defect[i])
    eig = np.linalg.eigvalsh(A).min(axis=1)
    i = int(np.argmin(eig))
    if eig[i] < op.ellipticity_lambda:
        raise EllipticityViolation(pts[i], eig[i], op.ellipticity_lambda)
    sup = np.maximum.reduce(
        [np.abs(A).reshape(len(pts), -1).max(axis=1), np.abs(b).max(axis=1), np.abs(c)]
    )
    j = int(np.argmax(sup))
    if sup[j] > op.bound_C:
        raise CoefficientUnbounded(pts[j], sup[j], op.bound_C)
    return ValidationReport(float(eig[i]), float(defect.max()), float(sup[j]), len(pts))


def apply_L(op: EllipticOperator, u: TestFunction, x: ArrayLike):
    """Pointwise ``Lu(x)`` from the analytic derivatives of ``u``."""
    if u.hessian is None:
        raise MissingDerivatives("apply_L needs the Hessian of u")
    pts, single = as_points(x, op.dim)
    A, b, c = op.coefficients(pts)
    val, grad, hess = u.jet(pts)
    out = np.einsum("mij,mij->m", A, hess) + np.einsum("mi,mi->m", b, grad) + c * val
    return restore(out, single)


def lambda0(op: EllipticOperator, domain: Domain, resolution: float) -> float:
    """Grid estimate of ``sup c`` over the closed domain.

    Sampling can only under-estimate the supremum; callers relying on an
    exact growth bound should use coefficients whose supremum is attained on
    the lattice (e.g. constants).
    """
    pts = domain.interior_samples(resolution)
    return float(np.max(op.coefficients(pts)[2]))


def check_boundary_membership(
    op: EllipticOperator, u: TestFunction, boundary_points: NDArray, tol: float = 1e-8
) -> dict[str, float]:
    """Largest ``|u|`` and ``|Lu|`` on the given boundary points; raises if above ``tol``."""
    u_res = float(np.max(np.abs(u.value(boundary_points))))
    res = {"u": u_res}
    if u.hessian is not None:
        res["Lu"] = float(np.max(np.abs(apply_L(op, u, boundary_points))))
    failed = {k: v for k, v in res.items() if v > tol}
    if failed:
        raise BoundaryConditionViolated(failed, tol)
    return res


def dissipativity_residual(
    op: EllipticOperator,
    u: TestFunction,
    domain: Domain,
    resolution: float,
    boundary_tol: float = 1e-8,
) -> float:
    """``sgn(u(x0)) (Lu - lambda0 u)(x0)`` at the lattice maximiser ``x0`` of ``|u|``.

    For ``u`` vanishing on the boundary the maximum principle makes this
    non-positive up to lattice error.
    """
    bnd = domain.boundary_samples(256)
    u_bnd = float(np.max(np.abs(u.value(bnd))))
    if u_bnd > boundary_tol:
        raise BoundaryConditionViolated({"u": u_bnd}, boundary_tol)
    pts = domain.interior_samples(resolution)
    vals = u.value(pts)
    i = int(np.argmax(np.abs(vals)))
    x0 = pts[i : i + 1]
    if domain.signed_distance(x0)[0] <= 0:
        raise ValueError("maximiser of |u| lies on the boundary; u is identically zero at this resolution")
    lam = lambda0(op, domain, resolution)
    Lu = apply_L(op, u, x0)[0]
    return float(np.sign(vals[i]) * (Lu - lam * vals[i]))


# ---------------------------------------------------------------------------
# built-in coefficient families (used by experiment configs)


def scalar_field(spec, dim: int) -> tuple[Field, Field]:
    """Scalar coefficient and its gradient from a config spec.

    ``spec`` is a number, ``{"family": "polynomial", "coeffs": [...], "axis": i}``
    (``sum coeffs[k] * x_i**k``) or ``{"family": "trig", "amplitude", "freq",
    "phase", "offset", "axis"}`` (``offset + amplitude * sin(freq * x_i + phase)``).
    """
    if isinstance(spec, (int, float)):
        v = float(spec)
        return (lambda x: np.full(len(x), v)), (lambda x: np.zeros((len(x), dim)))
    if not isinstance(spec, Mapping):
        raise ValueError(f"unrecognised coefficient spec {spec!r}")
    fam = spec.get("family")
    axis = int(spec.get("axis", 0))
    if not 0 <= axis < dim:
        raise ValueError(f"axis {axis} out of range for dimension {dim}")
    if fam == "constant":
        return scalar_field(float(spec["value"]), dim)
    if fam == "polynomial":
        coeffs = np.asarray(spec["coeffs"], dtype=float)
        dcoeffs = np.polynomial.polynomial.polyder(coeffs) if len(coeffs) > 1 else np.zeros(1)

        def grad(x):
            g = np.zeros((len(x), dim))
            g[:, axis] = np.polynomial.polynomial.polyval(x[:, axis], dcoeffs)
            return g

        return (lambda x: np.polynomial.polynomial.polyval(x[:, axis], coeffs)), grad
    if fam == "trig":
        amp = float(spec.get("amplitude", 1.0))
        freq = float(spec.get("freq", 1.0))
        phase = float(spec.get("phase", 0.0))
        off = float(spec.get("offset", 0.0))

        def grad(x):
            g = np.zeros((len(x), dim))
            g[:, axis] = amp * freq * np.cos(freq * x[:, axis] + phase)
            return g

        return (lambda x: off + amp * np.sin(freq * x[:, axis] + phase)), grad
    raise ValueError(f"unknown coefficient family {fam!r}")


def operator_from_spec(spec: Mapping, dim: int, domain: Domain | None = None) -> EllipticOperator:
    """Build an operator from nested coefficient specs.

    ``a`` is an ``n x n`` nested list (or a single spec in 1D), ``b`` a list
    of ``n`` specs (or a single spec in 1D), ``c`` a single spec. When
    ``ellipticity``/``bound`` are omitted they are estimated on a lattice of
    ``domain``.
    """
    a_spec = spec.get("a", 1.0)
    if dim == 1 and not isinstance(a_spec, list):
        a_spec = [[a_spec]]
    b_spec = spec.get("b", [0.0] * dim)
    if not isinstance(b_spec, list):
        b_spec = [b_spec]
    if len(a_spec) != dim or any(len(row) != dim for row in a_spec):
        raise ValueError(f"'a' must be a {dim}x{dim} nested list")
    if len(b_spec) != dim:
        raise ValueError(f"'b' must have {dim} entries")
    a_fields = [[scalar_field(s, dim) for s in row] for row in a_spec]
    b_fields = [scalar_field(s, dim) for s in b_spec]
    c_field, _ = scalar_field(spec.get("c", 0.0), dim)

    def a(x):
        return np.stack([np.stack([f(x) for f, _ in row], axis=-1) for row in a_fields], axis=-2)

    def grad_a(x):
        return np.stack([np.stack([g(x) for _, g in row], axis=-2) for row in a_fields], axis=-3)

    def b(x):
        return np.stack([f(x) for f, _ in b_fields], axis=-1)

    def grad_b(x):
        return np.stack([g(x) for _, g in b_fields], axis=-2)

    lam = spec.get("ellipticity")
    bound = spec.get("bound")
    if lam is None or bound is None:
        if domain is None:
            raise ValueError("ellipticity/bound must be given when no domain is supplied")
        pts = domain.interior_samples(domain.diameter / 400)
        A = a(pts)
        if lam is None:
            lam = 0.999 * float(np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, 1, 2))).min())
        if bound is None:
            bound = 1.001 * float(max(np.abs(A).max(), np.abs(b(pts)).max(), np.abs(c_field(pts)).max(), 1e-300))
    return EllipticOperator(dim, a, b, c_field, float(lam), float(bound), grad_a, grad_b)
