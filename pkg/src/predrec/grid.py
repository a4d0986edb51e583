"""Discretized mixing space: support points, dominating measure and quadrature.

Every integral against the mixing measure in this package goes through
:func:`integrate`, so the predictive densities used by the recursion and
the normalization of density estimates share one quadrature rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

LEBESGUE = "lebesgue"
COUNTING = "counting"

_NORMALIZATION_TOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Support points of the mixing distribution with quadrature weights.

    For a Lebesgue grid the weights are the trapezoidal weights of a
    uniform partition of ``[a, b]``; for a counting grid all weights are 1.
    """

    points: np.ndarray
    measure_kind: str
    quad_weights: np.ndarray
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        pts = _readonly(self.points)
        qw = _readonly(self.quad_weights)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "quad_weights", qw)
        if self.measure_kind not in (LEBESGUE, COUNTING):
            raise InvalidArgument(f"unknown measure kind {self.measure_kind!r}")
        if pts.ndim != 1 or pts.size < 1:
            raise InvalidArgument("a grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgument("grid points must be strictly increasing")
        if qw.shape != pts.shape or np.any(qw < 0) or not np.all(np.isfinite(qw)):
            raise InvalidArgument("need one finite nonnegative weight per point")

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def total_measure(self) -> float:
        return float(self.quad_weights.sum())

    def index_of(self, x0: float, atol: float = 1e-9) -> int:
        """Index of the grid point equal to ``x0`` (up to ``atol``)."""
        j = int(np.argmin(np.abs(self.points - x0)))
        if abs(self.points[j] - x0) > atol * max(1.0, abs(x0)):
            raise InvalidArgument(f"{x0} is not a grid point")
        return j

    def __repr__(self):
        return (
            f"GridMeasure({self.measure_kind}, G={self.size}, "
            f"[{self.points[0]:g}, {self.points[-1]:g}])"
        )


def make_grid(kind: str = LEBESGUE, a=None, b=None, G=None, points=None) -> GridMeasure:
    """Build a grid.

    Parameters
    ----------
    kind : {"lebesgue", "counting"}
    a, b : float
        Support bounds (Lebesgue only).
    G : int
        Number of points. Lebesgue grids need ``G >= 2``.
    points : array_like, optional
        Explicit support for a counting grid. Defaults to ``0, ..., G-1``.

    Examples
    --------
    >>> make_grid("lebesgue", 0, 10, 3).quad_weights
    array([2.5, 5. , 2.5])
    """
    if kind == LEBESGUE:
        if a is None or b is None or G is None:
            raise InvalidArgument("lebesgue grid needs a, b and G")
        a, b = float(a), float(b)
        if not (np.isfinite(a) and np.isfinite(b)):
            raise InvalidArgument("grid bounds must be finite")
        if not a < b:
            raise InvalidArgument("need a < b")
        if int(G) != G or G < 2:
            raise InvalidArgument("lebesgue grid needs G >= 2")
        G = int(G)
        pts = np.linspace(a, b, G)
        h = (b - a) / (G - 1)
        qw = np.full(G, h)
        qw[0] = qw[-1] = h / 2
        return GridMeasure(pts, LEBESGUE, qw, (a, b))
    if kind == COUNTING:
        if points is None:
            if G is None or int(G) != G or G < 1:
                raise InvalidArgument("counting grid needs G >= 1 or explicit points")
            points = np.arange(int(G), dtype=float)
        pts = np.asarray(points, dtype=float)
        if G is not None and pts.size != G:
            raise InvalidArgument("G does not match the number of points")
        return GridMeasure(pts, COUNTING, np.ones(pts.size))
    raise InvalidArgument(f"unknown measure kind {kind!r}")


def _check_values(grid, values):
    v = np.asarray(values, dtype=float)
    if v.shape[-1:] != (grid.size,):
        raise InvalidArgument(f"expected {grid.size} values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("values must be finite")
    return v


def integrate(grid: GridMeasure, values) -> float | np.ndarray:
    """Quadrature sum of ``values`` against the grid measure.

    A 2-D array is integrated row by row.
    """
    v = _check_values(grid, values)
    return v @ grid.quad_weights if v.ndim > 1 else float(v @ grid.quad_weights)


def cumulative_integral(grid: GridMeasure, values) -> np.ndarray:
    """Integral of ``values`` from the left end up to each grid point.

    On a Lebesgue grid this is the cumulative trapezoid (exact for the
    piecewise-linear interpolant); on a counting grid a cumulative sum.
    Works row-wise on 2-D input.
    """
    v = _check_values(grid, values)
    if grid.measure_kind == COUNTING:
        return np.cumsum(v, axis=-1)
    h = np.diff(grid.points)
    cells = 0.5 * (v[..., 1:] + v[..., :-1]) * h
    out = np.zeros_like(v)
    out[..., 1:] = np.cumsum(cells, axis=-1)
    return out


@dataclass(frozen=True, eq=False)
class GridDensity:
    """A density on a grid, normalized under the grid's quadrature."""

    grid: GridMeasure
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _readonly(_check_values(self.grid, self.values))
        if v.ndim != 1:
            raise InvalidArgument("density values must be one-dimensional")
        if np.any(v < 0):
            raise InvalidArgument("density values must be nonnegative")
        mass = float(v @ self.grid.quad_weights)
        if abs(mass - 1.0) > _NORMALIZATION_TOL:
            raise InvalidArgument(f"density integrates to {mass!r}, not 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, grid: GridMeasure) -> GridDensity:
        return cls(grid, np.full(grid.size, 1.0 / grid.total_measure))

    @classmethod
    def from_unnormalized(cls, grid: GridMeasure, values) -> GridDensity:
        v = _check_values(grid, values)
        mass = float(v @ grid.quad_weights)
        if not mass > 0:
            raise InvalidArgument("values have zero mass on the grid")
        return cls(grid, v / mass)

    @classmethod
    def from_function(cls, grid: GridMeasure, fn) -> GridDensity:
        """Evaluate ``fn`` on the grid and renormalize."""
        return cls.from_unnormalized(grid, fn(grid.points))
