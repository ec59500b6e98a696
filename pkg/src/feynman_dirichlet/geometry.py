"""Domains, boundary charts and the boundary cutoff family.

Points are handled as arrays of shape ``(m, dim)``. For one-dimensional
domains a bare scalar or a flat array of length ``m`` is accepted as well.
Charts map a neighbourhood ``U`` of the origin in the closed upper half space
``{z_n >= 0}`` onto a neighbourhood of a boundary point, with ``z_n = 0``
landing on the boundary and ``z_n > 0`` inside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NonpositiveTime, UnsupportedDomain


def as_points(x: ArrayLike, dim: int) -> tuple[NDArray, bool]:
    """Normalise ``x`` to shape ``(m, dim)``; the flag marks single-point input."""
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim == 0:
            return arr.reshape(1, 1), True
        if arr.ndim == 1:
            return arr.reshape(-1, 1), False
        if arr.ndim == 2 and arr.shape[1] == 1:
            return arr, False
    else:
        if arr.ndim == 1 and arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        if arr.ndim == 2 and arr.shape[1] == dim:
            return arr, False
    raise ValueError(f"cannot interpret array of shape {arr.shape} as points in R^{dim}")


def restore(values: NDArray, single: bool):
    return float(values[0]) if single else values


# ---------------------------------------------------------------------------
# smooth ramp


def _g(tau: NDArray) -> NDArray:
    pos = tau > 0
    out = np.zeros_like(tau, dtype=float)
    out[pos] = np.exp(-1.0 / tau[pos])
    return out


def smooth_ramp(theta: ArrayLike) -> NDArray:
    """C-infinity ramp: 0 for ``theta <= 1/2``, 1 for ``theta >= 1``, monotone in between."""
    th = np.asarray(theta, dtype=float)
    num = _g(2.0 * th - 1.0)
    den = num + _g(2.0 - 2.0 * th)
    out = np.where(th >= 1.0, 1.0, 0.0)
    mid = (th > 0.5) & (th < 1.0)
    out = np.where(mid, num / np.where(mid, den, 1.0), out)
    return out


def smoothstep(v: ArrayLike, start: float, stop: float) -> NDArray:
    """Smooth transition from 0 (``v <= start``) to 1 (``v >= stop``); ``start < stop``."""
    v = np.asarray(v, dtype=float)
    return smooth_ramp(0.5 + (v - start) / (2.0 * (stop - start)))


# ---------------------------------------------------------------------------
# domains


class Domain:
    """Common interface of the built-in bounded domains."""

    dim: int

    def signed_distance(self, x: ArrayLike):
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def bounds(self) -> tuple[NDArray, NDArray]:
        """Axis-aligned box ``(lo, hi)`` of the closure."""
        raise NotImplementedError

    def bounding_box(self, collar: float) -> tuple[NDArray, NDArray]:
        lo, hi = self.bounds()
        return lo - collar, hi + collar

    def boundary_samples(self, m: int) -> NDArray:
        raise NotImplementedError

    def interior_samples(self, resolution: float) -> NDArray:
        """Lattice points of the closure with spacing at most ``resolution``."""
        raise NotImplementedError

    def contains(self, x: ArrayLike) -> NDArray:
        pts, _ = as_points(x, self.dim)
        return self.signed_distance(pts) >= 0


@dataclass(frozen=True)
class Interval(Domain):
    lo: float
    hi: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Interval needs lo < hi, got ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        return self.length

    def signed_distance(self, x):
        pts, single = as_points(x, 1)
        d = np.minimum(pts[:, 0] - self.lo, self.hi - pts[:, 0])
        return restore(d, single)

    def bounds(self):
        return np.array([self.lo]), np.array([self.hi])

    def boundary_samples(self, m: int = 2) -> NDArray:
        return np.array([[self.lo], [self.hi]])

    def interior_samples(self, resolution: float) -> NDArray:
        k = max(int(np.ceil(self.length / resolution)), 99)
        return np.linspace(self.lo, self.hi, k + 1).reshape(-1, 1)


@dataclass(frozen=True)
class Disc(Domain):
    center: tuple[float, float]
    radius: float
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Disc needs radius > 0, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError("Disc center must have two coordinates")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def signed_distance(self, x):
        pts, single = as_points(x, 2)
        d = self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return restore(d, single)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def boundary_samples(self, m: int = 64) -> NDArray:
        th = 2.0 * np.pi * np.arange(m) / m
        return np.asarray(self.center) + self.radius * np.column_stack([np.cos(th), np.sin(th)])

    def interior_samples(self, resolution: float) -> NDArray:
        k = max(int(np.ceil(self.diameter / resolution)), 14)
        lo, hi = self.bounds()
        ax = [np.linspace(lo[i], hi[i], k + 1) for i in range(2)]
        pts = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = pts[self.signed_distance(pts) >= 0]
        return np.vstack([pts, self.boundary_samples(max(4 * k, 64))])


def boundary_distance(domain: Domain, x: ArrayLike):
    """Signed distance to the boundary, positive inside."""
    return domain.signed_distance(x)


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Boundary chart ``psi: U -> V``.

    All callables are vectorised over a leading point axis. ``jacobian``
    returns ``(m, n, n)`` with ``J[:, i, j] = d psi_i / d z_j`` and
    ``second_derivatives`` returns ``(m, n, n, n)`` with
    ``S[:, i, j, k] = d^2 psi_i / d z_j d z_k``.
    """

    psi: Callable[[NDArray], NDArray]
    psi_inverse: Callable[[NDArray], NDArray]
    jacobian: Callable[[NDArray], NDArray]
    second_derivatives: Callable[[NDArray], NDArray]
    halfwidths: NDArray
    anchor: NDArray

    @property
    def dim(self) -> int:
        return len(self.halfwidths)

    def in_U(self, z: NDArray, slack: float = 0.0) -> NDArray:
        return np.all(np.abs(z) <= np.asarray(self.halfwidths) * (1 + slack), axis=1)

    def sample_U(self, m: int, rng: np.random.Generator, upper: bool | None = None) -> NDArray:
        hw = np.asarray(self.halfwidths)
        z = rng.uniform(-1, 1, size=(m, self.dim)) * hw
        if upper is True:
            z[:, -1] = np.abs(z[:, -1])
        elif upper is False:
            z[:, -1] = -np.abs(z[:, -1])
        return z


def _interval_charts(dom: Interval) -> list[Chart]:
    hw = np.array([dom.length / 2.0])

    def make(x0: float, sign: float) -> Chart:
        return Chart(
            psi=lambda z: x0 + sign * np.asarray(z, dtype=float),
            psi_inverse=lambda x: sign * (np.asarray(x, dtype=float) - x0),
            jacobian=lambda z: np.full((len(z), 1, 1), sign),
            second_derivatives=lambda z: np.zeros((len(z), 1, 1, 1)),
            halfwidths=hw,
            anchor=np.array([x0]),
        )

    return [make(dom.lo, 1.0), make(dom.hi, -1.0)]


def _wrap(angle: NDArray) -> NDArray:
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def polar_cap_chart(disc: Disc, theta0: float, half_angle: float) -> Chart:
    """Chart ``(z', z_n) -> c + (R - z_n) * (cos, sin)(theta0 + z'/R)``."""
    c = np.asarray(disc.center)
    R = disc.radius

    def psi(z):
        phi = theta0 + z[:, 0] / R
        rho = R - z[:, 1]
        return c + rho[:, None] * np.column_stack([np.cos(phi), np.sin(phi)])

    def psi_inverse(x):
        rel = np.asarray(x, dtype=float) - c
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        return np.column_stack([R * _wrap(phi - theta0), R - np.hypot(rel[:, 0], rel[:, 1])])

    def jacobian(z):
        phi = theta0 + z[:, 0] / R
        rho = R - z[:, 1]
        J = np.empty((len(z), 2, 2))
        J[:, 0, 0] = -rho / R * np.sin(phi)
        J[:, 1, 0] = rho / R * np.cos(phi)
        J[:, 0, 1] = -np.cos(phi)
        J[:, 1, 1] = -np.sin(phi)
        return J

    def second_derivatives(z):
        phi = theta0 + z[:, 0] / R
        rho = R - z[:, 1]
        e = np.column_stack([np.cos(phi), np.sin(phi)])
        t = np.column_stack([-np.sin(phi), np.cos(phi)])
        S = np.zeros((len(z), 2, 2, 2))
        S[:, :, 0, 0] = -(rho / R**2)[:, None] * e
        S[:, :, 0, 1] = -t / R
        S[:, :, 1, 0] = -t / R
        return S

    anchor = c + R * np.array([np.cos(theta0), np.sin(theta0)])
    return Chart(psi, psi_inverse, jacobian, second_derivatives, np.array([R * half_angle, R / 2.0]), anchor)


def boundary_charts(domain: Domain, n_charts: int = 8) -> list[Chart]:
    """Finite chart atlas covering the boundary.

    Intervals get the two affine charts ``z -> lo + z`` and ``z -> hi - z``.
    Discs get ``n_charts`` (at least 4) polar caps centred at equally spaced
    angles; each cap spans twice the angular spacing so neighbours overlap.
    """
    if isinstance(domain, Interval):
        return _interval_charts(domain)
    if isinstance(domain, Disc):
        if n_charts < 4:
            raise ValueError("a disc needs at least 4 boundary charts")
        spacing = 2.0 * np.pi / n_charts
        return [polar_cap_chart(domain, k * spacing, spacing) for k in range(n_charts)]
    raise UnsupportedDomain(f"no built-in charts for {type(domain).__name__}")


# ---------------------------------------------------------------------------
# cutoff family


@dataclass(frozen=True)
class CutoffFamily:
    """Boundary cutoffs ``psi_s`` with width ``s(t) = t**beta``.

    ``psi_s(x) = profile(dist(x) / s)``: zero within ``s/2`` of the boundary
    (and outside the domain), one at distance ``>= s``.
    """

    beta: float = 0.5
    profile: Callable[[NDArray], NDArray] = smooth_ramp

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ValueError(f"cutoff exponent must lie in (0, 1/2], got {self.beta}")

    def width(self, t: float) -> float:
        if not t > 0:
            raise NonpositiveTime(f"time step must be positive, got {t}")
        return float(t) ** self.beta

    def __call__(self, domain: Domain, t: float, x: ArrayLike):
        s = self.width(t)
        pts, single = as_points(x, domain.dim)
        d = np.asarray(domain.signed_distance(pts))
        out = np.where(d > 0, self.profile(d / s), 0.0)
        return restore(out, single)


def cutoff_eval(family: CutoffFamily, domain: Domain, t: float, x: ArrayLike):
    return family(domain, t, x)
