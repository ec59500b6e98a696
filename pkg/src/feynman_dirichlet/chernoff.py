"""Iterated Feynman steps ``(F_{T/n})^n u0`` approximating the Dirichlet semigroup."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import IterateBlowup
from .extension import ExtensionOperator, global_extend
from .feynman import FeynmanStep, StepConfig, grid_step, interior_probes
from .geometry import CutoffFamily, Domain
from .operator import EllipticOperator, TestFunction, lambda0
from .sampled import Grid, SampledFunction

__all__ = [
    "IterationPlan",
    "ChernoffRun",
    "ConvergenceRow",
    "chernoff_run",
    "chernoff_iterate",
    "convergence_table",
    "grid_step",
]


@dataclass(frozen=True)
class IterationPlan:
    total_time: float
    n: int
    probe_grid: Grid | None = None
    record_intermediate: bool = False

    def __post_init__(self):
        if not self.total_time > 0:
            raise ValueError("total time must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("number of steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.total_time / self.n


@dataclass
class ChernoffRun:
    final: SampledFunction
    grid: Grid
    h: float
    sup0: float
    lambda0: float
    dt: float
    sups: list[float]
    iterates: list[SampledFunction] = field(default_factory=list)

    def bound_ok(self, slack: float = 1e-6) -> bool:
        """Every iterate obeys ``sup <= exp(lambda0 k dt) sup|u0| (1 + slack)``."""
        return all(
            s <= np.exp(self.lambda0 * k * self.dt) * self.sup0 * (1 + slack) for k, s in enumerate(self.sups, start=1)
        )


def chernoff_run(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    E: ExtensionOperator,
    u0: TestFunction,
    plan: IterationPlan,
    h: float | None = None,
    h_max: float = 0.02,
    kernel_radius: float = 8.0,
    interp_order: str = "cubic",
    blowup_slack: float = 1e-3,
) -> ChernoffRun:
    """Apply ``F_{T/n}`` ``n`` times, starting from ``E u0``.

    Later steps consume the previous iterate extended by zero: the cutoff
    makes every iterate vanish near the boundary already. Raises
    :class:`IterateBlowup` when an iterate exceeds the growth bound by more
    than ``blowup_slack``.
    """
    dt = plan.dt
    if h is None:
        h = grid_step(op, dt, h_max)
    grid = Grid.for_domain(domain, h, E.collar)
    current = global_extend(E, u0, grid=grid, interp_order=interp_order)
    inside = np.asarray(domain.signed_distance(grid.nodes)) >= 0
    sup0 = current.sup(inside)
    lam = lambda0(op, domain, h)
    step = FeynmanStep(op, domain, cutoff, grid, StepConfig(dt, kernel_radius=kernel_radius))
    sups, iterates = [], []
    for k in range(1, plan.n + 1):
        current = step(current)
        s = current.sup()
        bound = np.exp(lam * k * dt) * sup0 * (1 + blowup_slack)
        if s > bound:
            raise IterateBlowup(k, s, bound)
        sups.append(s)
        if plan.record_intermediate:
            iterates.append(current)
    final = current
    if plan.probe_grid is not None:
        final = SampledFunction.from_callable(plan.probe_grid, current, interp_order)
    return ChernoffRun(final, grid, h, sup0, lam, dt, sups, iterates)


def chernoff_iterate(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    E: ExtensionOperator,
    u0: TestFunction,
    plan: IterationPlan,
    **kwargs,
) -> SampledFunction:
    """Approximation of ``T_T u0``; keyword arguments go to :func:`chernoff_run`."""
    return chernoff_run(op, domain, cutoff, E, u0, plan, **kwargs).final


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    sup_error: float
    bound_ok: bool
    runtime: float


def convergence_table(
    op: EllipticOperator,
    domain: Domain,
    cutoff: CutoffFamily,
    E: ExtensionOperator,
    u0: TestFunction,
    total_time: float,
    n_list,
    reference: Callable[[NDArray], NDArray],
    delta_probe: float | None = None,
    probe_resolution: float | None = None,
    **kwargs,
) -> list[ConvergenceRow]:
    """Sup error against ``reference`` for each ``n``.

    Errors are taken over probes at distance ``>= delta_probe`` from the
    boundary, by default ``2 s(T / max n)``, so the cutoff layer is excluded.
    """
    n_list = [int(n) for n in n_list]
    if delta_probe is None:
        delta_probe = 2.0 * cutoff.width(total_time / max(n_list))
    probes = interior_probes(domain, delta_probe, probe_resolution)
    if len(probes) == 0:
        raise ValueError("no probes at the requested distance from the boundary")
    ref = np.asarray(reference(probes))
    rows = []
    for n in n_list:
        start = time.perf_counter()
        run = chernoff_run(op, domain, cutoff, E, u0, IterationPlan(total_time, n), **kwargs)
        err = float(np.max(np.abs(np.asarray(run.final(probes)) - ref)))
        rows.append(ConvergenceRow(n, run.h, err, run.bound_ok(), time.perf_counter() - start))
    return rows
