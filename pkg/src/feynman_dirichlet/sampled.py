"""Regular lattices over a bounding box and functions sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from .geometry import Disc, Domain, Interval, as_points, restore


@dataclass(frozen=True)
class Grid:
    """Lattice ``origin + h * k`` for ``0 <= k < shape`` (C order when flattened)."""

    origin: NDArray
    step: float
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(-1))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if len(self.shape) != len(self.origin):
            raise ValueError("grid origin and shape disagree on dimension")
        if not self.step > 0:
            raise ValueError("grid step must be positive")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def upper(self) -> NDArray:
        return self.origin + self.step * (np.asarray(self.shape) - 1)

    def axes(self) -> list[NDArray]:
        return [self.origin[i] + self.step * np.arange(s) for i, s in enumerate(self.shape)]

    @cached_property
    def nodes(self) -> NDArray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def fractional_index(self, pts: NDArray) -> NDArray:
        return (pts - self.origin) / self.step

    @classmethod
    def for_domain(cls, domain: Domain, h: float, collar: float, margin_nodes: int = 3) -> "Grid":
        """Lattice with step ``<= h`` covering the domain plus ``collar`` and a few spare nodes.

        Interval end points and the disc centre are lattice nodes.
        """
        if isinstance(domain, Interval):
            n_in = int(np.ceil(domain.length / h - 1e-9))
            step = domain.length / n_in
            pad = int(np.ceil(collar / step - 1e-9)) + margin_nodes
            return cls(np.array([domain.lo - pad * step]), step, (n_in + 1 + 2 * pad,))
        if isinstance(domain, Disc):
            half = int(np.ceil((domain.radius + collar) / h - 1e-9)) + margin_nodes
            c = np.asarray(domain.center)
            return cls(c - half * h, h, (2 * half + 1, 2 * half + 1))
        lo, hi = domain.bounding_box(collar)
        lo = lo - margin_nodes * h
        n = np.ceil((hi + margin_nodes * h - lo) / h).astype(int) + 1
        return cls(lo, h, tuple(n))


@dataclass(frozen=True)
class SampledFunction:
    """Node values on a :class:`Grid` with spline interpolation in between.

    Evaluation outside the lattice box returns zero, matching the compact
    support of the represented functions.
    """

    grid: Grid
    values: NDArray
    interp_order: str = "cubic"
    _coeffs: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled values must be finite")
        object.__setattr__(self, "values", vals)
        if self.interp_order not in ("linear", "cubic"):
            raise ValueError(f"interp_order must be 'linear' or 'cubic', got {self.interp_order!r}")

    @property
    def order(self) -> int:
        return 1 if self.interp_order == "linear" else 3

    def _spline(self) -> NDArray:
        if "c" not in self._coeffs:
            if self.order == 1:
                self._coeffs["c"] = self.values
            else:
                self._coeffs["c"] = ndimage.spline_filter(self.values, order=3, mode="grid-constant")
        return self._coeffs["c"]

    def __call__(self, x: ArrayLike):
        pts, single = as_points(x, self.grid.dim)
        idx = self.grid.fractional_index(pts)
        inside = np.all((idx >= 0) & (idx <= np.asarray(self.grid.shape) - 1), axis=1)
        out = np.zeros(len(pts))
        if inside.any():
            out[inside] = ndimage.map_coordinates(
                self._spline(), idx[inside].T, order=self.order, mode="grid-constant", cval=0.0, prefilter=False
            )
        return restore(out, single)

    @property
    def flat(self) -> NDArray:
        return self.values.reshape(-1)

    def sup(self, mask: NDArray | None = None) -> float:
        v = np.abs(self.flat if mask is None else self.flat[np.asarray(mask).reshape(-1)])
        return float(v.max(initial=0.0))

    def with_values(self, values: NDArray) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.interp_order)

    @classmethod
    def from_callable(cls, grid: Grid, f, interp_order: str = "cubic") -> "SampledFunction":
        return cls(grid, np.asarray(f(grid.nodes), dtype=float).reshape(grid.shape), interp_order)
