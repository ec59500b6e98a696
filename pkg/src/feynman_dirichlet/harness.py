"""Randomised supply of functions in D(L) (``u = Lu = 0`` on the boundary).

Members have the form ``u = q p + q^2 w`` where ``q`` vanishes to first
order on the boundary, ``p`` is a seeded random polynomial and ``w`` is
chosen so that ``Lu`` vanishes on the boundary. On the boundary
``L(q^2 w) = 2 w <grad q, A grad q>``, hence::

    w = -(p (tr(A Hq) + <b, grad q>) + 2 <grad q, A grad p>) / (2 <grad q, A grad q>)

there. In 1D ``w`` is the affine interpolant of its two end values; on a
disc it is the harmonic extension of its boundary trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import NDArray

from .errors import UnsupportedDomain
from .extension import membership_residuals
from .geometry import Disc, Domain, Interval
from .operator import EllipticOperator, TestFunction


@dataclass(frozen=True)
class DLMember:
    u: TestFunction
    residuals: dict[str, float]
    seed: int


def _poly1d(coeffs: NDArray, center: float, scale: float) -> TestFunction:
    d1 = P.polyder(coeffs)
    d2 = P.polyder(coeffs, 2)

    def s(x):
        return (x[:, 0] - center) / scale

    return TestFunction(
        1,
        lambda x: P.polyval(s(x), coeffs),
        lambda x: (P.polyval(s(x), d1) / scale)[:, None],
        lambda x: (P.polyval(s(x), d2) / scale**2)[:, None, None],
    )


def _poly2d(coeffs: NDArray, center: NDArray, scale: float) -> TestFunction:
    cx = P.polyder(coeffs, axis=0)
    cy = P.polyder(coeffs, axis=1)
    cxx = P.polyder(cx, axis=0)
    cxy = P.polyder(cx, axis=1)
    cyy = P.polyder(cy, axis=1)

    def ev(x, c):
        s = (x - center) / scale
        return P.polyval2d(s[:, 0], s[:, 1], c)

    def hessian(x):
        h = np.empty((len(x), 2, 2))
        h[:, 0, 0] = ev(x, cxx)
        h[:, 0, 1] = h[:, 1, 0] = ev(x, cxy)
        h[:, 1, 1] = ev(x, cyy)
        return h / scale**2

    return TestFunction(
        2,
        lambda x: ev(x, coeffs),
        lambda x: np.column_stack([ev(x, cx), ev(x, cy)]) / scale,
        hessian,
    )


def _interval_q(dom: Interval) -> TestFunction:
    lo, hi = dom.lo, dom.hi
    return TestFunction(
        1,
        lambda x: (x[:, 0] - lo) * (hi - x[:, 0]),
        lambda x: (lo + hi - 2 * x[:, 0])[:, None],
        lambda x: np.full((len(x), 1, 1), -2.0),
    )


def _disc_q(dom: Disc) -> TestFunction:
    c = np.asarray(dom.center)
    R = dom.radius
    return TestFunction(
        2,
        lambda x: R**2 - np.sum((x - c) ** 2, axis=1),
        lambda x: -2.0 * (x - c),
        lambda x: np.broadcast_to(-2.0 * np.eye(2), (len(x), 2, 2)).copy(),
    )


def boundary_correction(op: EllipticOperator, q: TestFunction, p: TestFunction, xb: NDArray) -> NDArray:
    """Boundary values of ``w`` that make ``L(q p + q^2 w)`` vanish at ``xb``."""
    A, b, _ = op.coefficients(xb)
    _, gq, hq = q.jet(xb)
    pv, gp, _ = p.jet(xb)
    first = pv * (np.einsum("mij,mij->m", A, hq) + np.einsum("mi,mi->m", b, gq))
    cross = 2.0 * np.einsum("mi,mij,mj->m", gq, A, gp)
    return -(first + cross) / (2.0 * np.einsum("mi,mij,mj->m", gq, A, gq))


def harmonic_extension(dom: Disc, trace, samples: int = 256, rtol: float = 1e-17) -> TestFunction:
    """Harmonic function on the disc whose boundary values interpolate ``trace(theta)``.

    The trace is expanded in a Fourier series through an FFT of ``samples``
    equispaced values and continued as ``Re sum g_k zeta^k`` with
    ``zeta = (x - center) / radius`` as a complex number.
    """
    th = 2.0 * np.pi * np.arange(samples) / samples
    F = np.fft.rfft(trace(th)) / samples
    g = 2.0 * F[: samples // 2]
    g[0] = F[0]
    keep = np.nonzero(np.abs(g) > rtol * np.abs(g).max(initial=1e-300))[0]
    K = int(keep.max()) + 1 if len(keep) else 1
    g = g[:K]
    c = np.asarray(dom.center)
    R = dom.radius

    def zeta(x):
        return ((x[:, 0] - c[0]) + 1j * (x[:, 1] - c[1])) / R

    def series(x, order):
        z = zeta(x)
        d = g if order == 0 else (P.polyder(g, order) if K > order else np.zeros(1))
        return P.polyval(z, d)

    def gradient(x):
        G1 = series(x, 1)
        return np.column_stack([G1.real, -G1.imag]) / R

    def hessian(x):
        G2 = series(x, 2)
        h = np.empty((len(x), 2, 2))
        h[:, 0, 0] = G2.real
        h[:, 1, 1] = -G2.real
        h[:, 0, 1] = h[:, 1, 0] = -G2.imag
        return h / R**2

    return TestFunction(2, lambda x: series(x, 0).real, gradient, hessian)


def build_dl_member(
    op: EllipticOperator,
    domain: Domain,
    seed: int,
    degree: int = 3,
    amplitude: float = 0.3,
) -> DLMember:
    """Seeded random member of D(L) with its sampled boundary residuals."""
    rng = np.random.default_rng(seed)
    if isinstance(domain, Interval):
        coeffs = amplitude * rng.standard_normal(degree + 1)
        coeffs[0] += 1.0
        mid, half = 0.5 * (domain.lo + domain.hi), 0.5 * domain.length
        p = _poly1d(coeffs, mid, half)
        q = _interval_q(domain)
        ends = np.array([[domain.lo], [domain.hi]])
        w_lo, w_hi = boundary_correction(op, q, p, ends)
        w = _poly1d(np.array([0.5 * (w_lo + w_hi), 0.5 * (w_hi - w_lo)]), mid, half)
    elif isinstance(domain, Disc):
        coeffs = amplitude * rng.standard_normal((degree + 1, degree + 1))
        coeffs[np.add.outer(np.arange(degree + 1), np.arange(degree + 1)) > degree] = 0.0
        coeffs[0, 0] += 1.0
        c = np.asarray(domain.center)
        p = _poly2d(coeffs, c, domain.radius)
        q = _disc_q(domain)

        def trace(theta):
            xb = c + domain.radius * np.column_stack([np.cos(theta), np.sin(theta)])
            return boundary_correction(op, q, p, xb)

        w = harmonic_extension(domain, trace)
    else:
        raise UnsupportedDomain(f"no D(L) harness for {type(domain).__name__}")
    u = q * p + (q * q) * w
    return DLMember(u, membership_residuals(op, u, domain), seed)
