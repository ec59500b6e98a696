"""Sup-norm preserving C^2 extension of functions in D(L) across the boundary.

The construction reflects along the conormal direction ``A v_n / <v_n, A v_n>``
and squeezes the reflected normal coordinate with ``F(z_n) = -z_n + (b'/a') z_n^2``
so that first and second derivatives match across the boundary whenever
``u = Lu = 0`` there. Local extensions in adapted boundary charts are glued with
a partition of unity; inside the domain the result is ``u`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BoundaryConditionViolated,
    CollarTooWide,
    FrameNotOrthonormal,
    NormalPointsOutward,
    OutsideChart,
    OutsideCollar,
    SingularJacobian,
    UnsupportedDomain,
)
from .geometry import Chart, Disc, Domain, Interval, as_points, boundary_charts, restore, smoothstep
from .operator import EllipticOperator, TestFunction, apply_L, check_boundary_membership
from .sampled import Grid, SampledFunction

# ---------------------------------------------------------------------------
# half-line


@dataclass(frozen=True)
class SqueezeMap1D:
    """Quadratic squeeze ``F(x) = -x + (b/a) x^2`` on the collar ``(-epsilon, 0)``."""

    a_bdry: float
    b_bdry: float
    epsilon: float

    def __post_init__(self):
        if not self.a_bdry > 0:
            raise ValueError("a_bdry must be positive")
        if not self.epsilon > 0:
            raise ValueError("collar width must be positive")
        if self.b_bdry < 0 and self.epsilon >= self.a_bdry / abs(self.b_bdry):
            raise CollarTooWide(
                f"collar {self.epsilon:.4g} reaches the root {self.a_bdry / abs(self.b_bdry):.4g} of the squeeze map"
            )

    @classmethod
    def for_coefficients(cls, a: float, b: float, cap: float = 1.0) -> "SqueezeMap1D":
        """Widest collar up to ``cap`` that keeps ``F`` a safe distance from its root."""
        eps = cap if b == 0 else min(cap, 0.9 * a / abs(b))
        return cls(float(a), float(b), float(eps))

    @property
    def kappa(self) -> float:
        return self.b_bdry / self.a_bdry

    def __call__(self, x: ArrayLike):
        x = np.asarray(x, dtype=float)
        if np.any((x <= -self.epsilon) | (x >= 0)):
            raise OutsideCollar(f"squeeze map is defined on (-{self.epsilon:.4g}, 0)")
        return -x + self.kappa * x**2


def squeeze_eval(smap: SqueezeMap1D, x: ArrayLike):
    return smap(x)


@dataclass(frozen=True)
class HalflineExtension:
    """``u`` on ``[0, inf)``, ``-eta * u(F(x))`` on the collar, zero beyond it."""

    u: TestFunction
    squeeze: SqueezeMap1D

    def raw(self, x: ArrayLike):
        """Extension before the cutoff is applied."""
        pts, single = as_points(x, 1)
        xs = pts[:, 0]
        out = np.zeros(len(xs))
        pos = xs >= 0
        out[pos] = self.u.value(pts[pos])
        col = ~pos
        if col.any():
            out[col] = -self.u.value(self.squeeze(xs[col])[:, None])
        return restore(out, single)

    def cutoff(self, x: ArrayLike):
        eps = self.squeeze.epsilon
        return smoothstep(np.asarray(x, dtype=float), -0.9 * eps, -0.4 * eps)

    def __call__(self, x: ArrayLike):
        pts, single = as_points(x, 1)
        xs = pts[:, 0]
        out = np.zeros(len(xs))
        keep = xs > -0.9 * self.squeeze.epsilon
        out[keep] = self.raw(xs[keep]) * np.where(xs[keep] >= 0, 1.0, self.cutoff(xs[keep]))
        return restore(out, single)


def extend_halfline(
    u: TestFunction, a: float, b: float, epsilon: float | None = None, tol: float = 1e-8
) -> HalflineExtension:
    """Extend ``u`` from ``[0, inf)`` for ``L = a d^2 + b d``.

    Requires ``u(0) = 0`` and ``a u''(0) + b u'(0) = 0`` within ``tol``.
    """
    zero = np.zeros((1, 1))
    val, grad, hess = u.jet(zero)
    residuals = {"u(0)": abs(float(val[0])), "Lu(0)": abs(float(a * hess[0, 0, 0] + b * grad[0, 0]))}
    failed = {k: v for k, v in residuals.items() if v > tol}
    if failed:
        raise BoundaryConditionViolated(failed, tol)
    smap = SqueezeMap1D.for_coefficients(a, b) if epsilon is None else SqueezeMap1D(a, b, epsilon)
    return HalflineExtension(u, smap)


# ---------------------------------------------------------------------------
# frames, transformed coefficients, conormal direction


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame field.

    ``vectors(x)`` returns ``(m, n, n)`` whose column ``k`` is ``v_k``;
    ``normal_derivatives(x)`` returns ``(m, n, n)`` whose column ``l`` is the
    directional derivative ``d_{v_l} v_n``.
    """

    vectors: Callable[[NDArray], NDArray]
    normal_derivatives: Callable[[NDArray], NDArray]

    @classmethod
    def constant(cls, V: ArrayLike) -> "Frame":
        V = np.asarray(V, dtype=float)
        n = V.shape[0]
        return cls(lambda x: np.broadcast_to(V, (len(x), n, n)), lambda x: np.zeros((len(x), n, n)))


def _positive_qr(J: NDArray) -> tuple[NDArray, NDArray]:
    Q, R = np.linalg.qr(J)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s[s == 0] = 1.0
    return Q * s[..., None, :], R * s[..., :, None]


def chart_frame(chart: Chart) -> Frame:
    """Gram-Schmidt frame of the chart Jacobian columns, with exact derivatives.

    With ``J = QR`` and a perturbation ``dJ``, ``dQ = Q (T - T^T)`` where
    ``T`` is the strictly lower part of ``Q^T dJ R^{-1}``.
    """

    def frame_data(x):
        z = chart.psi_inverse(x)
        J = chart.jacobian(z)
        if np.any(np.abs(np.linalg.det(J)) < 1e-8):
            raise SingularJacobian("chart Jacobian is singular")
        Q, R = _positive_qr(J)
        return z, J, Q, R

    def vectors(x):
        return frame_data(np.asarray(x, dtype=float))[2]

    def normal_derivatives(x):
        z, J, Q, R = frame_data(np.asarray(x, dtype=float))
        S = chart.second_derivatives(z)
        n = J.shape[-1]
        Rinv = np.linalg.inv(R)
        dQn = np.empty((len(z), n, n))  # dQn[:, :, k] = d/dz_k of v_n
        for k in range(n):
            M = np.swapaxes(Q, 1, 2) @ S[..., k] @ Rinv
            T = np.tril(M, -1)
            dQn[:, :, k] = (Q @ (T - np.swapaxes(T, 1, 2)))[:, :, n - 1]
        # direction of v_l in chart coordinates is J^{-1} v_l = R^{-1} e_l
        return dQn @ Rinv

    return Frame(vectors, normal_derivatives)


def _frame_array(frame, pts: NDArray) -> tuple[NDArray, NDArray]:
    if isinstance(frame, Frame):
        return frame.vectors(pts), frame.normal_derivatives(pts)
    V = np.asarray(frame, dtype=float)
    n = V.shape[-1]
    V = np.broadcast_to(V, (len(pts), n, n))
    return V, np.zeros_like(V)


def _check_orthonormal(V: NDArray, tol: float = 1e-10):
    n = V.shape[-1]
    defect = np.abs(np.swapaxes(V, 1, 2) @ V - np.eye(n)).max()
    if defect > tol:
        raise FrameNotOrthonormal(f"frame deviates from orthonormal by {defect:.3g}")


def transformed_coefficients(op: EllipticOperator, frame, x: ArrayLike):
    """``(a_nn, b_tilde)`` of the ``d_{v_n}`` terms of L written in the frame.

    ``a_nn = <v_n, A v_n>`` and
    ``b_tilde = <b, v_n> + sum_l <v_l, A d_{v_l} v_n>``.
    """
    pts, single = as_points(x, op.dim)
    V, dV = _frame_array(frame, pts)
    _check_orthonormal(V)
    A, b, _ = op.coefficients(pts)
    vn = V[:, :, -1]
    ann = np.einsum("mi,mij,mj->m", vn, A, vn)
    bt = np.einsum("mi,mi->m", b, vn) + np.einsum("mil,mij,mjl->m", V, A, dV)
    return restore(ann, single), restore(bt, single)


def oblique_direction(op: EllipticOperator, frame, x: ArrayLike, domain: Domain | None = None):
    """Reflection direction ``v_n + sum_{i<n} <v_i, A v_n>/<v_n, A v_n> v_i``.

    This is the conormal ``A v_n / <v_n, A v_n>``; its ``v_n`` component is 1.
    When ``domain`` is given, ``v_n`` must point into it.
    """
    pts, single = as_points(x, op.dim)
    V, _ = _frame_array(frame, pts)
    _check_orthonormal(V)
    vn = V[:, :, -1]
    if domain is not None:
        step = 1e-6 * max(domain.diameter, 1.0)
        d0 = np.asarray(domain.signed_distance(pts))
        d1 = np.asarray(domain.signed_distance(pts + step * vn))
        if np.any(d1 <= d0):
            raise NormalPointsOutward("v_n does not point into the domain")
    A, _, _ = op.coefficients(pts)
    Avn = np.einsum("mij,mj->mi", A, vn)
    coef = np.einsum("mik,mi->mk", V, Avn) / np.einsum("mi,mi->m", vn, Avn)[:, None]
    coef[:, -1] = 0.0
    out = vn + np.einsum("mik,mk->mi", V, coef)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# adapted charts


@dataclass(frozen=True)
class AdaptedChart:
    """Chart ``psi o psi0`` whose normal coordinate line leaves the boundary along the conormal.

    ``psi0(w', w_n) = (w', 0) + w_n * y(w')`` with ``y = D psi^{-1} v_tilde``.
    ``epsilon`` is the collar depth (in ``w_n``) on which the squeezed
    reflection is defined.
    """

    base: Chart
    op: EllipticOperator
    frame: Frame
    epsilon: float = 0.0

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def halfwidths(self) -> NDArray:
        return self.base.halfwidths

    def _bz(self, wp: NDArray) -> NDArray:
        return np.column_stack([wp, np.zeros(len(wp))])

    def boundary_point(self, wp: NDArray) -> NDArray:
        return self.base.psi(self._bz(wp))

    def conormal(self, wp: NDArray) -> NDArray:
        return oblique_direction(self.op, self.frame, self.boundary_point(wp))

    def y(self, wp: NDArray) -> NDArray:
        J = self.base.jacobian(self._bz(wp))
        return np.linalg.solve(J, self.conormal(wp)[..., None])[..., 0]

    def psi0(self, w: NDArray) -> NDArray:
        w = np.asarray(w, dtype=float)
        wp = w[:, :-1]
        return self._bz(wp) + w[:, -1:] * self.y(wp)

    def psi(self, w: NDArray) -> NDArray:
        return self.base.psi(self.psi0(w))

    def psi0_inverse(self, z: NDArray, tol: float = 1e-13, max_iter: int = 50) -> NDArray:
        z = np.asarray(z, dtype=float)
        n = z.shape[1]
        if n == 1:
            return z / self.y(np.zeros((len(z), 0)))[:, -1:]
        zp, zn = z[:, :-1], z[:, -1:]
        wp = zp.copy()
        fd = 1e-7 * max(float(np.max(self.halfwidths)), 1.0)

        def G(w):
            yy = self.y(w)
            return w + zn * yy[:, :-1] / yy[:, -1:] - zp

        for _ in range(max_iter):
            r = G(wp)
            if np.max(np.abs(r), initial=0.0) < tol:
                break
            Jg = np.empty((len(wp), n - 1, n - 1))
            for k in range(n - 1):
                e = np.zeros(n - 1)
                e[k] = fd
                Jg[:, :, k] = (G(wp + e) - G(wp - e)) / (2 * fd)
            wp = wp - np.linalg.solve(Jg, r[..., None])[..., 0]
        yy = self.y(wp)
        return np.column_stack([wp, zn[:, 0] / yy[:, -1]])

    def psi_inverse(self, x: NDArray) -> NDArray:
        return self.psi0_inverse(self.base.psi_inverse(np.asarray(x, dtype=float)))

    def boundary_coefficients(self, wp: NDArray) -> tuple[NDArray, NDArray]:
        """``(a', b')`` at ``psi(w', 0)``."""
        ann, bt = transformed_coefficients(self.op, self.frame, self.boundary_point(wp))
        return np.atleast_1d(ann), np.atleast_1d(bt)

    def kappa(self, wp: NDArray) -> NDArray:
        a, b = self.boundary_coefficients(wp)
        return b / a

    def squeeze(self, w: NDArray) -> NDArray:
        """``(w', -w_n + kappa(w') w_n^2)`` for ``w_n < 0``."""
        out = np.array(w, dtype=float, copy=True)
        wn = out[:, -1]
        out[:, -1] = -wn + self.kappa(out[:, :-1]) * wn**2
        return out

    def tangential_samples(self, per_axis: int = 41) -> NDArray:
        hw = self.halfwidths[:-1]
        if len(hw) == 0:
            return np.zeros((1, 0))
        ax = [np.linspace(-h, h, per_axis) for h in hw]
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, len(hw))


def _psi0_det(chart: AdaptedChart, w: NDArray, h: float = 1e-6) -> NDArray:
    n = w.shape[1]
    J = np.empty((len(w), n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        J[:, :, k] = (chart.psi0(w + e) - chart.psi0(w - e)) / (2 * h)
    return np.linalg.det(J)


def build_adapted_chart(chart: Chart, op: EllipticOperator, collar_cap: float | None = None) -> AdaptedChart:
    """Adapt ``chart`` to ``op`` and choose its collar depth.

    The depth is the smallest of ``collar_cap``, ``0.9 min a'/|b'|`` (keeps the
    squeeze positive) and the largest depth whose reflected image stays
    within 90% of the chart's normal half-width.
    """
    frame = chart_frame(chart)
    probe = AdaptedChart(chart, op, frame)
    wp = probe.tangential_samples()
    zb = probe._bz(wp)
    J = chart.jacobian(zb)
    if np.any(np.abs(np.linalg.det(J)) < 1e-8):
        raise SingularJacobian("chart Jacobian is singular on its boundary face")
    yy = probe.y(wp)
    if np.any(yy[:, -1] <= 0):
        raise NormalPointsOutward("conormal does not point into the domain")
    a, b = probe.boundary_coefficients(wp)
    hw_n = float(chart.halfwidths[-1])
    cap = 0.1 * 2 * hw_n if collar_cap is None else float(collar_cap)
    kmax = float(np.max(np.abs(b) / a))
    eps = cap
    if kmax > 0:
        eps = min(eps, 0.9 / kmax)
        # eps + kmax eps^2 <= 0.9 hw_n
        eps = min(eps, (-1 + np.sqrt(1 + 4 * kmax * 0.9 * hw_n)) / (2 * kmax))
    else:
        eps = min(eps, 0.9 * hw_n)
    adapted = AdaptedChart(chart, op, frame, float(eps))
    reach = eps + kmax * eps**2
    wn = np.linspace(-eps, reach, 9)
    W = np.array([[*p, q] for p in wp[:: max(len(wp) // 11, 1)] for q in wn]).reshape(-1, chart.dim)
    det = _psi0_det(adapted, W)
    if np.any(det <= 0):
        raise CollarTooWide(f"adapted chart is not injective on a collar of depth {eps:.4g}")
    return adapted


# ---------------------------------------------------------------------------
# local and global extension


@dataclass(frozen=True)
class LocalExtension:
    chart: AdaptedChart
    u: TestFunction

    def reflected(self, x: NDArray) -> tuple[NDArray, NDArray]:
        """Chart coordinates of ``x`` and the mask of points lying outside the domain."""
        w = self.chart.psi_inverse(x)
        return w, w[:, -1] < 0

    def raw(self, x: ArrayLike):
        """Reflected values ``-u(psi(F(w)))`` on the collar, ``u`` elsewhere."""
        pts, single = as_points(x, self.chart.dim)
        w, outside = self.reflected(pts)
        hw = self.chart.halfwidths
        if np.any(np.abs(w[outside, :-1]) > hw[:-1] * (1 + 1e-9)):
            raise OutsideChart("point lies outside the chart's tangential range")
        if np.any(w[outside, -1] <= -self.chart.epsilon):
            raise OutsideChart("point lies beyond the chart's collar")
        out = np.empty(len(pts))
        out[~outside] = self.u.value(pts[~outside])
        if outside.any():
            out[outside] = -self.u.value(self.chart.psi(self.chart.squeeze(w[outside])))
        return restore(out, single)

    __call__ = raw


def local_extend(chart: AdaptedChart, u: TestFunction, tol: float = 1e-8, check: bool = True) -> LocalExtension:
    """Squeezed reflection of ``u`` through ``chart``.

    ``u`` must satisfy ``u = Lu = 0`` on the chart's boundary face.
    """
    if check:
        xb = chart.boundary_point(chart.tangential_samples())
        check_boundary_membership(chart.op, u, xb, tol)
    return LocalExtension(chart, u)


@dataclass(frozen=True)
class PartitionOfUnity:
    """Weights ``eta_0..eta_M``; ``eta_i = chi_i(x) * radial_i(dist(x))`` for charts.

    ``chi`` is a tangential partition over the charts. The radial factor is 1
    between ``-0.4 eps_i`` and ``inner_width / 2``, and 0 beyond ``-0.9 eps_i``
    and beyond ``inner_width``. ``eta_0`` completes the sum to 1 inside the
    domain and vanishes outside it.
    """

    domain: Domain
    tangential: Callable[[NDArray], NDArray]
    collars: NDArray
    inner_width: float

    def weights(self, x: ArrayLike) -> NDArray:
        pts, _ = as_points(x, self.domain.dim)
        d = np.asarray(self.domain.signed_distance(pts))
        inner = 1.0 - smoothstep(d, 0.5 * self.inner_width, self.inner_width)
        eps = np.asarray(self.collars)[None, :]
        radial = np.where(d[:, None] >= 0, inner[:, None], smoothstep(d[:, None], -0.9 * eps, -0.4 * eps))
        eta = self.tangential(pts) * radial
        eta0 = np.where(d >= 0, 1.0 - inner, 0.0)
        return np.column_stack([eta0, eta])


def _interval_tangential(dom: Interval):
    mid = 0.5 * (dom.lo + dom.hi)
    w = 0.1 * dom.length

    def chi(x):
        right = smoothstep(x[:, 0], mid - w, mid + w)
        return np.column_stack([1.0 - right, right])

    return chi


def _disc_tangential(dom: Disc, n_charts: int):
    spacing = 2.0 * np.pi / n_charts
    centers = spacing * np.arange(n_charts)
    c = np.asarray(dom.center)

    def chi(x):
        rel = x - c
        th = np.arctan2(rel[:, 1], rel[:, 0])
        dist = np.abs((th[:, None] - centers[None, :] + np.pi) % (2 * np.pi) - np.pi)
        phi = 1.0 - smoothstep(dist, 0.55 * spacing, 0.75 * spacing)
        return phi / phi.sum(axis=1, keepdims=True)

    return chi


@dataclass(frozen=True)
class ExtensionOperator:
    domain: Domain
    op: EllipticOperator
    charts: list[AdaptedChart]
    partition: PartitionOfUnity
    tol: float = 1e-8

    @property
    def collar(self) -> float:
        return float(max(ch.epsilon for ch in self.charts))

    def check_membership(self, u: TestFunction) -> dict[str, float]:
        return check_boundary_membership(self.op, u, self.domain.boundary_samples(256), self.tol)

    def evaluate(self, u: TestFunction, x: ArrayLike, check: bool = True):
        """``sum_i eta_i E_i u`` at arbitrary points (``u`` itself inside the domain)."""
        if check:
            self.check_membership(u)
        pts, single = as_points(x, self.domain.dim)
        d = np.asarray(self.domain.signed_distance(pts))
        out = np.zeros(len(pts))
        inside = d >= 0
        out[inside] = u.value(pts[inside])
        collar = (~inside) & (d > -self.collar)
        if collar.any():
            cp = pts[collar]
            eta = self.partition.weights(cp)[:, 1:]
            acc = np.zeros(len(cp))
            for i, chart in enumerate(self.charts):
                act = eta[:, i] > 0
                if act.any():
                    acc[act] += eta[act, i] * LocalExtension(chart, u).raw(cp[act])
            out[collar] = acc
        return restore(out, single)

    def materialize(self, u: TestFunction, grid: Grid, interp_order: str = "cubic", check: bool = True) -> SampledFunction:
        return SampledFunction(grid, self.evaluate(u, grid.nodes, check=check).reshape(grid.shape), interp_order)


def build_extension(
    op: EllipticOperator,
    domain: Domain,
    collar_cap: float | None = None,
    n_charts: int = 8,
    tol: float = 1e-8,
) -> ExtensionOperator:
    """Assemble charts, collars and partition of unity for ``domain``.

    ``collar_cap`` defaults to a tenth of the domain diameter.
    """
    cap = 0.1 * domain.diameter if collar_cap is None else float(collar_cap)
    charts = [build_adapted_chart(ch, op, cap) for ch in boundary_charts(domain, n_charts)]
    if isinstance(domain, Interval):
        chi = _interval_tangential(domain)
        inner = 0.25 * domain.length
    elif isinstance(domain, Disc):
        chi = _disc_tangential(domain, len(charts))
        inner = 0.25 * domain.radius
    else:
        raise UnsupportedDomain(f"no partition of unity for {type(domain).__name__}")
    collars = np.array([ch.epsilon for ch in charts])
    return ExtensionOperator(domain, op, charts, PartitionOfUnity(domain, chi, collars, inner), tol)


def global_extend(
    E: ExtensionOperator,
    u: TestFunction,
    grid: Grid | None = None,
    h: float | None = None,
    interp_order: str = "cubic",
) -> SampledFunction:
    """Materialise ``Eu`` on a lattice over the bounding box.

    Either pass ``grid`` or a step ``h`` for :meth:`Grid.for_domain`.
    """
    if grid is None:
        if h is None:
            raise ValueError("global_extend needs a grid or a step h")
        grid = Grid.for_domain(E.domain, h, E.collar)
    return E.materialize(u, grid, interp_order)


def membership_residuals(op: EllipticOperator, u: TestFunction, domain: Domain, m: int = 256) -> dict[str, float]:
    """Largest ``|u|`` and ``|Lu|`` over sampled boundary points, without raising."""
    xb = domain.boundary_samples(m)
    return {"u": float(np.max(np.abs(u.value(xb)))), "Lu": float(np.max(np.abs(apply_L(op, u, xb))))}


def conormal_flow(op: EllipticOperator, frame, x0: NDArray, s: float, substeps: int = 4) -> NDArray:
    """RK4 integral curve of the conormal field, started at ``x0`` and run for parameter ``s``."""
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    ds = s / substeps

    def f(p):
        return np.atleast_2d(oblique_direction(op, frame, p))

    for _ in range(substeps):
        k1 = f(x)
        k2 = f(x + 0.5 * ds * k1)
        k3 = f(x + 0.5 * ds * k2)
        k4 = f(x + ds * k3)
        x = x + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def boundary_identity_residual(
    op: EllipticOperator, frame, u: TestFunction, xb: ArrayLike, h: float = 1e-4
) -> NDArray:
    """``a_nn d^2_v u + b_tilde d_v u`` at boundary points by central differences.

    Derivatives are taken along the integral curve of the conormal field
    ``v``, so the second difference sees ``d_v (d_v u)`` including the
    variation of ``v`` itself.
    """
    pts, single = as_points(xb, op.dim)
    ann, bt = transformed_coefficients(op, frame, pts)
    up = u.value(conormal_flow(op, frame, pts, h))
    um = u.value(conormal_flow(op, frame, pts, -h))
    u0 = u.value(pts)
    d1 = (up - um) / (2 * h)
    d2 = (up - 2 * u0 + um) / h**2
    return restore(np.atleast_1d(ann) * d2 + np.atleast_1d(bt) * d1, single)
