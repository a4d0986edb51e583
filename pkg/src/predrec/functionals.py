"""Scalar summaries of a mixing density: CDF or density at a point, mean, custom."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .grid import COUNTING, GridDensity, GridMeasure, _check_values

CDF_AT = "cdf_at"
DENSITY_AT = "density_at"
MEAN = "mean"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Functional:
    tag: str
    x0: float | None = None
    values: np.ndarray | None = None

    @classmethod
    def cdf_at(cls, x0: float) -> Functional:
        return cls(CDF_AT, x0=float(x0))

    @classmethod
    def density_at(cls, x0: float) -> Functional:
        return cls(DENSITY_AT, x0=float(x0))

    @classmethod
    def mean(cls) -> Functional:
        return cls(MEAN)

    @classmethod
    def custom(cls, values) -> Functional:
        v = np.array(values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InvalidArgument("custom functional needs finite values, one per point")
        v.setflags(write=False)
        return cls(CUSTOM, values=v)

    @property
    def label(self) -> str:
        if self.tag in (CDF_AT, DENSITY_AT):
            return f"{self.tag}({self.x0:g})"
        return self.tag

    def evaluate(self, grid: GridMeasure, values) -> float | np.ndarray:
        """Apply to raw density values; 2-D input gives one result per row."""
        v = _check_values(grid, values)
        if self.tag == CDF_AT:
            return _cdf_at(grid, v, self.x0)
        if self.tag == DENSITY_AT:
            return v[..., grid.index_of(self.x0)]
        if self.tag == MEAN:
            return v @ (grid.quad_weights * grid.points)
        if self.tag == CUSTOM:
            if self.values.size != grid.size:
                raise InvalidArgument("custom functional does not match the grid")
            return v @ (grid.quad_weights * self.values)
        raise InvalidArgument(f"unknown functional {self.tag!r}")


def _cdf_at(grid, v, x0):
    pts = grid.points
    if grid.measure_kind == COUNTING:
        return v[..., pts <= x0].sum(axis=-1)
    if x0 <= pts[0]:
        return np.zeros(v.shape[:-1]) if v.ndim > 1 else 0.0
    if x0 >= pts[-1]:
        return v @ grid.quad_weights
    # trapezoid cells fully left of x0, then the exact integral of the
    # linear interpolant over the straddled part [x_j, x0]
    j = int(np.searchsorted(pts, x0, side="right")) - 1
    h = np.diff(pts[: j + 1])
    full = (0.5 * (v[..., 1 : j + 1] + v[..., :j]) * h).sum(axis=-1)
    d = x0 - pts[j]
    if d == 0:
        return full
    t = d / (pts[j + 1] - pts[j])
    vj, vk = v[..., j], v[..., j + 1]
    return full + d * (vj + 0.5 * t * (vk - vj))


def apply_functional(psi: Functional, p: GridDensity) -> float:
    return float(psi.evaluate(p.grid, p.values))
