"""Kernel families k(y | x) for the mixture model.

Each kernel evaluates a whole grid at once. :meth:`Kernel.matrix` stacks
columns for a batch of observations, which is what the recursion engine
consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, InvalidArgument
from .grid import GridMeasure

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class Kernel:
    """Base class. Subclasses implement :meth:`matrix`."""

    def column(self, y: float, grid: GridMeasure) -> np.ndarray:
        """``k(y | x_j)`` for every grid point."""
        return self.matrix(np.array([y], dtype=float), grid)[0]

    def matrix(self, ys, grid: GridMeasure) -> np.ndarray:
        raise NotImplementedError

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        """Draw one observation per latent value in ``x``."""
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def check_grid(self, grid: GridMeasure) -> None:
        pass

    def _ys(self, ys):
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        if not np.all(np.isfinite(ys)):
            raise DomainError("observations must be finite")
        return ys


@dataclass(frozen=True)
class NormalKernel(Kernel):
    """Location kernel ``N(y | x, scale**2)``."""

    scale: float = 0.5

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgument("normal kernel needs scale > 0")

    def matrix(self, ys, grid):
        ys = self._ys(ys)
        z = (ys[:, None] - grid.points[None, :]) / self.scale
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.scale

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + self.scale * rng.standard_normal(x.shape)

    def __str__(self):
        return f"normal:{self.scale:g}"


@dataclass(frozen=True)
class ScaledTKernel(Kernel):
    """Location-scale Student t: ``t((y - x) / scale | df) / scale``."""

    df: float = 5.0
    scale: float = 0.3

    def __post_init__(self):
        if not (self.df > 0 and self.scale > 0):
            raise InvalidArgument("scaled t kernel needs df > 0 and scale > 0")

    def matrix(self, ys, grid):
        ys = self._ys(ys)
        nu = self.df
        log_c = (
            gammaln((nu + 1) / 2) - gammaln(nu / 2)
            - 0.5 * math.log(nu * math.pi) - math.log(self.scale)
        )
        z = (ys[:, None] - grid.points[None, :]) / self.scale
        return np.exp(log_c - (nu + 1) / 2 * np.log1p(z * z / nu))

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + self.scale * rng.standard_t(self.df, x.shape)

    def __str__(self):
        return f"t:{self.df:g}:{self.scale:g}"


@dataclass(frozen=True)
class GammaKernel(Kernel):
    """``Gamma(y | shape=shape_mult * x, rate=rate)``.

    The mean of ``y`` given ``x`` is ``shape_mult * x / rate``. At ``x = 0``
    the distribution collapses to a point mass at zero, so the column
    entry there is the limiting value 0 for every ``y > 0``.
    """

    shape_mult: float = 20.0
    rate: float = 20.0

    def __post_init__(self):
        if not (self.shape_mult > 0 and self.rate > 0):
            raise InvalidArgument("gamma kernel needs shape_mult > 0 and rate > 0")

    def check_grid(self, grid):
        if grid.points[0] < 0:
            raise InvalidArgument("gamma kernel needs nonnegative grid points")

    def matrix(self, ys, grid):
        self.check_grid(grid)
        ys = self._ys(ys)
        if np.any(ys <= 0):
            raise DomainError("gamma kernel needs y > 0")
        pos = grid.points > 0
        shape = self.shape_mult * grid.points[pos]
        log_y = np.log(ys)[:, None]
        out = np.zeros((ys.size, grid.size))
        out[:, pos] = np.exp(
            shape * math.log(self.rate) + (shape - 1) * log_y
            - self.rate * ys[:, None] - gammaln(shape)
        )
        return out

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return rng.gamma(self.shape_mult * x, 1.0 / self.rate)

    def __str__(self):
        return f"gamma:{self.shape_mult:g}:{self.rate:g}"


@dataclass(frozen=True, eq=False)
class CustomKernel(Kernel):
    """Kernel given by a callable ``fn(y, points) -> column``."""

    fn: Callable[[float, np.ndarray], np.ndarray]
    sampler: Callable | None = None

    def matrix(self, ys, grid):
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        out = np.array([
            np.broadcast_to(np.asarray(self.fn(y, grid.points), dtype=float), (grid.size,))
            for y in ys
        ])
        if not np.all(np.isfinite(out)) or np.any(out < 0):
            raise DomainError("custom kernel produced a negative or non-finite value")
        return out

    def sample(self, x, rng):
        if self.sampler is None:
            return super().sample(x, rng)
        return self.sampler(x, rng)


@dataclass(frozen=True, eq=False)
class TabulatedKernel(Kernel):
    """Discrete kernel over outcomes ``0..K-1``: row ``y`` of ``table``.

    ``table[y, j]`` is the probability of outcome ``y`` given grid point
    ``j``. Meant for small enumerable models on counting grids.
    """

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or np.any(t < 0) or not np.all(np.isfinite(t)):
            raise InvalidArgument("table must be a finite nonnegative 2-D array")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def matrix(self, ys, grid):
        if grid.size != self.table.shape[1]:
            raise InvalidArgument("table width does not match the grid")
        ys = np.atleast_1d(np.asarray(ys))
        idx = ys.astype(int)
        if np.any(idx != ys) or np.any(idx < 0) or np.any(idx >= self.table.shape[0]):
            raise DomainError(f"outcomes must be integers in [0, {self.table.shape[0]})")
        return self.table[idx]

    def sample(self, x_index, rng):
        # x_index: grid indices of the latent values
        x_index = np.asarray(x_index, dtype=int)
        probs = self.table[:, x_index].T
        u = rng.random(x_index.shape)[..., None]
        return (u > np.cumsum(probs, axis=-1)).sum(axis=-1)


def parse_kernel(text: str) -> Kernel:
    """Parse ``normal:SCALE``, ``t:DF:SCALE`` or ``gamma:SHAPE_MULT:RATE``."""
    name, *args = text.strip().split(":")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise InvalidArgument(f"bad kernel parameters in {text!r}") from None
    if name == "normal" and len(vals) == 1:
        return NormalKernel(*vals)
    if name in ("t", "scaled_t") and len(vals) == 2:
        return ScaledTKernel(*vals)
    if name == "gamma" and len(vals) == 2:
        return GammaKernel(*vals)
    raise InvalidArgument(
        f"cannot parse kernel {text!r}; use normal:S, t:DF:S or gamma:A:RATE"
    )


def kernel_column(k: Kernel, y: float, grid: GridMeasure) -> np.ndarray:
    """``k(y | x_j)`` over the grid; shorthand for ``k.column(y, grid)``."""
    return k.column(y, grid)
