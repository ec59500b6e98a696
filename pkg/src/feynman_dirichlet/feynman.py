"""The single-step Gaussian integral operator ``F_t`` and its consistency residual.

Because ``L`` carries no factor 1/2, the kernel at ``x`` is the normal
density with mean ``x + t b(x)`` and covariance ``2 t A(x)``::

    F_t u(x) = psi_s(x) e^{t c(x)} (det A(x) (4 pi t)^n)^{-1/2}
               * int exp(-<A^{-1}(x - y + t b), x - y + t b> / (4t)) Eu(y) dy

Completing the square gives the equivalent second form with prefactor
``e^{t v(x)}``, ``v = c - <A^{-1} b, b> / 4``, and exponent
``-<A^{-1}(x-y), x-y>/(4t) - <A^{-1} b, x-y>/2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse
from scipy.special import ndtr

from .errors import KernelTruncatedWarning, NonpositiveTime
from .geometry import CutoffFamily, Domain, as_points, restore
from .operator import EllipticOperator, TestFunction, apply_L
from .sampled import Grid, SampledFunction

QUADRATURE_RULES = ("trapezoid", "gauss-hermite")


@dataclass(frozen=True)
class StepConfig:
    t: float
    quadrature: str = "trapezoid"
    gh_order: int = 20
    kernel_radius: float = 8.0

    def __post_init__(self):
        if not self.t > 0:
            raise NonpositiveTime(f"time step must be positive, got {self.t}")
        if self.quadrature not in QUADRATURE_RULES:
            raise ValueError(f"quadrature must be one of {QUADRATURE_RULES}, got {self.quadrature!r}")
        if self.gh_order < 8 or self.gh_order % 2:
            raise ValueError("Gauss-Hermite order must be an even integer >= 8")
        if self.kernel_radius < 6:
            raise ValueError("kernel_radius must be at least 6 standard deviations")


def grid_step(op: EllipticOperator, t: float, h_max: float = 0.02) -> float:
    """Lattice step resolving the kernel: ``min(0.25 sqrt(2 lambda t), h_max)``."""
    if not t > 0:
        raise NonpositiveTime(f"time step must be positive, got {t}")
    return float(min(0.25 * np.sqrt(2.0 * op.ellipticity_lambda * t), h_max))


def kernel_weight(op: EllipticOperator, x: ArrayLike, y: ArrayLike, t: float):
    """Gaussian kernel density at ``y`` for the base point ``x`` (first form)."""
    if not t > 0:
        raise NonpositiveTime(f"time step must be positive, got {t}")
    xp, _ = as_points(x, op.dim)
    yp, single = as_points(y, op.dim)
    A, b, _ = op.coefficients(xp[:1])
    e = xp[0] - yp + t * b[0]
    Ainv = np.linalg.inv(A[0])
    q = np.einsum("mi,ij,mj->m", e, Ainv, e)
    norm = 1.0 / np.sqrt(np.linalg.det(A[0]) * (4.0 * np.pi * t) ** op.dim)
    return restore(norm * np.exp(-q / (4.0 * t)), single)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class _Local:
    """Per-point coefficient data shared by both forms."""

    A: NDArray
    Ainv: NDArray
    b: NDArray
    c: NDArray
    norm: NDArray

    @classmethod
    def at(cls, op: EllipticOperator, pts: NDArray, t: float) -> "_Local":
        A, b, c = op.coefficients(pts)
        A = np.array(A)
        norm = 1.0 / np.sqrt(np.linalg.det(A) * (4.0 * np.pi * t) ** op.dim)
        return cls(A, np.linalg.inv(A), np.array(b), np.array(c), norm)


def _log_weight(loc: _Local, d: NDArray, t: float, form: int) -> NDArray:
    """Log of prefactor times kernel for ``d = x - y`` (excluding the cutoff)."""
    if form == 1:
        e = d + t * loc.b
        return t * loc.c - np.einsum("mi,mij,mj->m", e, loc.Ainv, e) / (4.0 * t)
    Aib = np.einsum("mij,mj->mi", loc.Ainv, loc.b)
    v = loc.c - 0.25 * np.einsum("mi,mi->m", Aib, loc.b)
    return t * v - np.einsum("mi,mij,mj->m", d, loc.Ainv, d) / (4.0 * t) - 0.5 * np.einsum("mi,mi->m", Aib, d)


def _window(op: EllipticOperator, loc: _Local, grid: Grid, t: float, kernel_radius: float) -> int:
    sig = np.sqrt(2.0 * t * np.linalg.eigvalsh(loc.A).max(initial=0.0))
    drift = t * np.abs(loc.b).max(initial=0.0)
    return int(np.ceil((kernel_radius * sig + drift) / grid.step))


def _clipped_mass(loc: _Local, pts: NDArray, grid: Grid, t: float) -> float:
    """Largest Gaussian mass (per axis) falling outside the lattice box."""
    mu = pts + t * loc.b
    sd = np.sqrt(2.0 * t * np.diagonal(loc.A, axis1=1, axis2=2))
    lo = grid.origin - 0.5 * grid.step
    hi = grid.upper + 0.5 * grid.step
    clipped = ndtr((lo - mu) / sd) + ndtr((mu - hi) / sd)
    return float(clipped.max(initial=0.0))


def _edge_is_zero(f: SampledFunction) -> bool:
    v = f.values
    return all(
        not np.any(np.take(v, 0, axis=k)) and not np.any(np.take(v, -1, axis=k)) for k in range(v.ndim)
    )


def _truncation_check(worst: float, f: SampledFunction) -> None:
    # data vanishing on the outer lattice layer is taken to vanish beyond it
    if worst > 1e-12 and not _edge_is_zero(f):
        warnings.warn(
            KernelTruncatedWarning(f"lattice box clips {worst:.2e} of the Gaussian mass"), stacklevel=4
        )


def _offsets(r: int, n: int) -> NDArray:
    return np.array(list(product(range(-r, r + 1), repeat=n)), dtype=int).reshape(-1, n)


def _padded(grid: Grid, r: int) -> Grid:
    return Grid(grid.origin - r * grid.step, grid.step, tuple(k + 2 * r for k in grid.shape))


def _trapezoid_terms(op, pts, grid: Grid, t, kernel_radius, form, block: int = 2_000_000):
    """Lattice quadrature on ``grid`` padded by the kernel window.

    Returns the padded grid and a generator of ``(rows, nodes, weights)``
    blocks, ``nodes`` and ``weights`` of shape ``(m, k)``. With
    ``d = delta - h o`` the quadratic form splits into a per-point part, a
    cross term and a per-offset part, so no per-term matrices are gathered.
    """
    loc = _Local.at(op, pts, t)
    r = _window(op, loc, grid, t, kernel_radius)
    big = _padded(grid, r)
    offs = _offsets(r, grid.dim)
    base = np.rint(big.fractional_index(pts)).astype(int)
    h, n = grid.step, grid.dim
    strides = np.array([int(np.prod(big.shape[i + 1 :])) for i in range(n)])
    flat_off = offs @ strides
    outer = (offs[:, :, None] * offs[:, None, :]).reshape(len(offs), n * n).astype(float)
    hn = h**n

    def blocks():
        per = max(1, block // len(offs))
        for s in range(0, len(pts), per):
            rr = np.arange(s, min(s + per, len(pts)))
            P = 0.5 * (loc.Ainv[rr] + np.swapaxes(loc.Ainv[rr], 1, 2))
            delta = pts[rr] - (big.origin + h * base[rr])
            if form == 1:
                delta = delta + t * loc.b[rr]
            Pd = np.einsum("mij,mj->mi", P, delta)
            quad = (
                np.einsum("mi,mi->m", Pd, delta)[:, None]
                - 2.0 * h * (Pd @ offs.T)
                + h * h * (P.reshape(len(rr), n * n) @ outer.T)
            )
            logw = -quad / (4.0 * t)
            if form == 1:
                logw += (t * loc.c[rr])[:, None]
            else:
                Aib = np.einsum("mij,mj->mi", loc.Ainv[rr], loc.b[rr])
                v = loc.c[rr] - 0.25 * np.einsum("mi,mi->m", Aib, loc.b[rr])
                logw += (t * v - 0.5 * np.einsum("mi,mi->m", Aib, delta))[:, None] + 0.5 * h * (Aib @ offs.T)
            w = hn * loc.norm[rr][:, None] * np.exp(logw)
            yield rr, (base[rr] @ strides)[:, None] + flat_off[None, :], w

    return big, r, blocks()


def _trapezoid(op, pts, Eu: SampledFunction, t, kernel_radius, form):
    big, r, terms = _trapezoid_terms(op, pts, Eu.grid, t, kernel_radius, form)
    # values beyond the lattice box count as zero
    flat = np.pad(Eu.values, r).reshape(-1)
    out = np.zeros(len(pts))
    for rows, nodes, w in terms:
        out[rows] = np.einsum("mk,mk->m", w, flat[nodes])
    return out


def _gauss_hermite(op, pts, Eu: SampledFunction, t, order, form):
    """Tensor Gauss-Hermite rule in the whitened variable of the Gaussian."""
    xi, wi = np.polynomial.hermite.hermgauss(order)
    n = op.dim
    nodes = np.array(list(product(xi, repeat=n))).reshape(-1, n)
    weights = np.prod(np.array(list(product(wi, repeat=n))).reshape(-1, n), axis=1) / np.pi ** (n / 2)
    loc = _Local.at(op, pts, t)
    Lc = np.linalg.cholesky(loc.A)
    out = np.empty(len(pts))
    for i, x in enumerate(pts):
        if form == 1:
            y = x + t * loc.b[i] + 2.0 * np.sqrt(t) * nodes @ Lc[i].T
            out[i] = np.exp(t * loc.c[i]) * (weights @ Eu(y))
        else:
            # centred at x; the drift enters through the linear term of form two
            y = x + 2.0 * np.sqrt(t) * nodes @ Lc[i].T
            d = x - y
            Aib = loc.Ainv[i] @ loc.b[i]
            v = loc.c[i] - 0.25 * Aib @ loc.b[i]
            out[i] = np.exp(t * v) * (weights @ (np.exp(-0.5 * d @ Aib) * Eu(y)))
    return out


def _apply(op, domain, cutoff, Eu, cfg: StepConfig, x, form: int, cutoff_override=None):
    pts, single = as_points(x, op.dim)
    t = cfg.t
    psi = np.asarray(cutoff(domain, t, pts)) if cutoff_override is None else np.broadcast_to(
        np.asarray(cutoff_override, dtype=float), (len(pts),)
    )
    out = np.zeros(len(pts))
    act = psi > 0
    if act.any():
        p = pts[act]
        if cfg.quadrature == "trapezoid":
            _truncation_check(_clipped_mass(_Local.at(op, p, t), p, Eu.grid, t), Eu)
            out[act] = psi[act] * _trapezoid(op, p, Eu, t, cfg.kernel_radius, form)
        else:
            out[act] = psi[act] * _gauss_hermite(op, p, Eu, t, cfg.gh_order, form)
    return restore(out, single)


def feynman_apply(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    Eu: SampledFunction,
    cfg: StepConfig,
    x: ArrayLike,
    cutoff_override: float | None = None,
):
    """``F_t`` applied to the extended function ``Eu`` at one or many points.

    ``cutoff_override`` replaces the cutoff factor by a constant, which is
    useful for checking the bare integral against closed forms.
    """
    return _apply(op, domain, cutoff, Eu, cfg, x, 1, cutoff_override)


def feynman_apply_form2(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    Eu: SampledFunction,
    cfg: StepConfig,
    x: ArrayLike,
    cutoff_override: float | None = None,
):
    """Same operator as :func:`feynman_apply`, evaluated through the completed-square form."""
    return _apply(op, domain, cutoff, Eu, cfg, x, 2, cutoff_override)


class FeynmanStep:
    """``F_t`` as a linear map of node values on a fixed lattice.

    Only nodes where the cutoff is positive produce nonzero output. The map
    is assembled as a sparse matrix when it fits in ``max_nnz`` entries and
    recomputed on the fly otherwise.
    """

    def __init__(
        self,
        op: EllipticOperator,
        domain: Domain,
        cutoff: CutoffFamily,
        grid: Grid,
        cfg: StepConfig,
        max_nnz: int = 20_000_000,
    ):
        if cfg.quadrature != "trapezoid":
            raise ValueError("FeynmanStep works on lattice values and needs the trapezoid rule")
        self.op, self.domain, self.cutoff, self.grid, self.cfg = op, domain, cutoff, grid, cfg
        psi = np.asarray(cutoff(domain, cfg.t, grid.nodes))
        self.active = np.nonzero(psi > 0)[0]
        pts = grid.nodes[self.active]
        self._scale = psi[self.active]
        self._pts = pts
        self.matrix = None
        self._clipped = 0.0
        if not len(pts):
            return
        loc = _Local.at(op, pts, cfg.t)
        self._clipped = _clipped_mass(loc, pts, grid, cfg.t)
        r = _window(op, loc, grid, cfg.t, cfg.kernel_radius)
        if len(pts) * (2 * r + 1) ** grid.dim <= max_nnz:
            big, pad, terms = _trapezoid_terms(op, pts, grid, cfg.t, cfg.kernel_radius, 1)
            rows, cols, vals = [], [], []
            for rr, nn, ww in terms:
                idx = np.stack(np.unravel_index(nn.ravel(), big.shape), axis=1) - pad
                keep = np.all((idx >= 0) & (idx < grid.shape), axis=1)
                rows.append(np.repeat(rr, nn.shape[1])[keep])
                cols.append(np.ravel_multi_index(idx[keep].T, grid.shape))
                vals.append(ww.ravel()[keep])
            self.matrix = sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(pts), grid.size)
            )

    def __call__(self, f: SampledFunction) -> SampledFunction:
        g = f.grid
        if not (np.array_equal(g.origin, self.grid.origin) and g.step == self.grid.step and g.shape == self.grid.shape):
            raise ValueError("input lives on a different lattice")
        out = np.zeros(self.grid.size)
        if len(self.active):
            _truncation_check(self._clipped, f)
            if self.matrix is not None:
                vals = self.matrix @ f.flat
            else:
                vals = _trapezoid(self.op, self._pts, f, self.cfg.t, self.cfg.kernel_radius, 1)
            out[self.active] = self._scale * vals
        return f.with_values(out.reshape(self.grid.shape))


# ---------------------------------------------------------------------------
# consistency


def interior_probes(domain: Domain, margin: float, resolution: float | None = None) -> NDArray:
    """Lattice points of the domain at distance at least ``margin`` from the boundary.

    The default spacing is 0.01 on intervals and 0.04 in the plane.
    """
    if resolution is None:
        resolution = 0.01 if domain.dim == 1 else 0.04
    pts = domain.interior_samples(resolution)
    return pts[np.asarray(domain.signed_distance(pts)) >= margin]


def consistency_residual(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    E,
    u: TestFunction,
    t: float,
    h: float | None = None,
    h_max: float = 0.02,
    probes: NDArray | None = None,
    probe_margin: float = 2.0,
    quadrature: str = "trapezoid",
    kernel_radius: float = 8.0,
    interp_order: str = "cubic",
) -> float:
    """``sup |(F_t u - u)/t - Lu|`` over interior probes.

    Probes default to lattice points at distance ``>= probe_margin * s(t)``
    from the boundary, where the cutoff equals one. ``h`` defaults to
    :func:`grid_step`.
    """
    from .extension import global_extend

    cfg = StepConfig(t, quadrature=quadrature, kernel_radius=kernel_radius)
    if h is None:
        h = grid_step(op, t, h_max)
    if probes is None:
        probes = interior_probes(domain, probe_margin * cutoff.width(t))
    if len(probes) == 0:
        raise ValueError("no interior probes at the requested margin")
    Eu = global_extend(E, u, h=h, interp_order=interp_order)
    Ft = np.asarray(feynman_apply(op, domain, cutoff, Eu, cfg, probes))
    res = (Ft - u.value(probes)) / t - apply_L(op, u, probes)
    return float(np.max(np.abs(res)))
