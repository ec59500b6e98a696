"""Reference solutions: sine-series eigen-expansion, Crank-Nicolson, Feynman-Kac Monte Carlo."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, solve_banded

from .errors import NonpositiveTime, PathExplosion, SingularTridiagonal
from .geometry import Domain, Interval, as_points, restore
from .operator import EllipticOperator
from .sampled import Grid, SampledFunction


def analytic_heat(
    domain: Interval,
    coefficients: ArrayLike,
    t: float,
    x: ArrayLike,
    diffusivity: float = 1.0,
    potential: float = 0.0,
):
    """``sum c_k exp((c - a (k pi / l)^2) t) sin(k pi (x - lo) / l)``.

    The defaults give the Dirichlet heat semigroup of ``L = d^2``.
    """
    if t < 0:
        raise NonpositiveTime(f"time must be non-negative, got {t}")
    ck = np.asarray(coefficients, dtype=float)
    pts, single = as_points(x, 1)
    w = np.pi * np.arange(1, len(ck) + 1) / domain.length
    decay = np.exp((potential - diffusivity * w**2) * t)
    out = np.sin(np.outer(pts[:, 0] - domain.lo, w)) @ (ck * decay)
    return restore(out, single)


def crank_nicolson(
    op: EllipticOperator,
    domain: Interval,
    u0,
    T: float,
    steps: int,
    grid: Grid | int,
) -> SampledFunction:
    """Theta = 1/2 time stepping of ``u_t = Lu`` with zero Dirichlet data.

    ``grid`` is a lattice whose end nodes are the interval end points, or
    the number of cells. ``u0`` is a callable on points ``(m, 1)`` or an
    array of node values.
    """
    if not isinstance(domain, Interval):
        raise TypeError("crank_nicolson handles intervals only")
    if not T > 0:
        raise NonpositiveTime(f"final time must be positive, got {T}")
    if isinstance(grid, (int, np.integer)):
        grid = Grid(np.array([domain.lo]), domain.length / int(grid), (int(grid) + 1,))
    x = grid.nodes
    if not (np.isclose(x[0, 0], domain.lo) and np.isclose(x[-1, 0], domain.hi)):
        raise ValueError("grid end nodes must coincide with the interval end points")
    u = np.asarray(u0(x) if callable(u0) else u0, dtype=float).reshape(-1).copy()
    u[[0, -1]] = 0.0
    h = grid.step
    dt = T / steps
    A, b, c = op.coefficients(x[1:-1])
    a = A[:, 0, 0]
    lower = a / h**2 - b[:, 0] / (2 * h)
    diag = -2 * a / h**2 + c
    upper = a / h**2 + b[:, 0] / (2 * h)
    m = len(diag)
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5 * dt * upper[:-1]
    ab[1] = 1 - 0.5 * dt * diag
    ab[2, :-1] = -0.5 * dt * lower[1:]
    v = u[1:-1]
    for _ in range(steps):
        rhs = (1 + 0.5 * dt * diag) * v
        rhs[1:] += 0.5 * dt * lower[1:] * v[:-1]
        rhs[:-1] += 0.5 * dt * upper[:-1] * v[1:]
        try:
            v = solve_banded((1, 1), ab, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise SingularTridiagonal(str(exc)) from exc
    out = np.zeros(grid.size)
    out[1:-1] = v
    return SampledFunction(grid, out.reshape(grid.shape), "cubic")


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    dt: float = 1e-4
    seed: int = 0
    boundary_test: str = "node-crossing"
    threads: int = 1
    chunk: int = 10_000

    def __post_init__(self):
        if self.paths < 10_000:
            raise ValueError("Monte Carlo needs at least 10^4 paths")
        if not self.dt > 0:
            raise ValueError("Euler step must be positive")
        if self.boundary_test != "node-crossing":
            raise ValueError("only node-crossing exit detection is implemented")
        if self.threads < 1 or self.chunk < 1:
            raise ValueError("threads and chunk must be positive")


def _simulate(op: EllipticOperator, domain: Domain, u0, t: float, x: NDArray, n_steps: int, dt: float, m: int, rng):
    n = op.dim
    xi = np.broadcast_to(x, (m, n)).copy()
    alive = np.ones(m, dtype=bool)
    log_weight = np.zeros(m)
    sdt = np.sqrt(dt)
    for _ in range(n_steps):
        dW = rng.standard_normal((m, n))
        A, b, c = op.coefficients(xi)
        log_weight += c * dt
        sig = np.linalg.cholesky(2.0 * A)
        xi = xi + b * dt + sdt * np.einsum("mij,mj->mi", sig, dW)
        if not np.all(np.isfinite(xi)):
            raise PathExplosion("Euler-Maruyama produced non-finite coordinates")
        alive &= np.asarray(domain.signed_distance(xi)) > 0
    vals = np.zeros(m)
    if alive.any():
        vals[alive] = np.exp(log_weight[alive]) * np.asarray(u0(xi[alive]))
    return vals


def feynman_kac_estimate(
    op: EllipticOperator, domain: Domain, u0, t: float, x: ArrayLike, cfg: McConfig
) -> tuple[float, float]:
    """Mean and standard error of ``exp(int c) u0(xi_t) 1{t < exit time}``.

    Paths follow ``d xi = b dt + sigma dW`` with ``sigma sigma^T = 2A`` and
    are killed at the first Euler node outside the domain. Chunks draw from
    independent streams spawned from ``cfg.seed``, so results do not depend
    on the thread count.
    """
    if not t > 0:
        raise NonpositiveTime(f"time must be positive, got {t}")
    pts, _ = as_points(x, op.dim)
    n_steps = int(round(t / cfg.dt))
    if n_steps < 100:
        raise ValueError("Euler step must be at most t/100")
    dt = t / n_steps
    sizes = [cfg.chunk] * (cfg.paths // cfg.chunk)
    if cfg.paths % cfg.chunk:
        sizes.append(cfg.paths % cfg.chunk)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def run(i):
        return _simulate(op, domain, u0, t, pts[0], n_steps, dt, sizes[i], np.random.default_rng(seeds[i]))

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    vals = np.concatenate(parts)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
