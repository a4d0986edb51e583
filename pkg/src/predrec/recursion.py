"""Predictive recursion over an ordered data sequence.

Each observation ``y_i`` updates the current mixing density by

    p_i(x) = (1 - w_i) p_{i-1}(x) + w_i k(y_i | x) p_{i-1}(x) / f_{i-1}(y_i)

where ``f_{i-1}(y_i)`` is the quadrature integral of ``k(y_i | .) p_{i-1}``.
Using the same quadrature for ``f`` and for normalization makes the update
mass-preserving to rounding error.

Two routes compute this: :func:`pr_step` is a plain numpy single-step
update, and :func:`fold_orders` is a compiled loop that runs many data
orders at once. The permutation ensemble uses the latter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DegeneratePredictive, InvalidArgument
from .grid import GridDensity, GridMeasure
from .kernels import Kernel

PREDICTIVE_FLOOR = 1e-300
DEFAULT_EXPONENT = 0.67


@dataclass(frozen=True)
class WeightSchedule:
    """Weights ``w_i = (i + 1) ** -exponent`` for ``i >= 1``.

    Exponents in (0.5, 1] give a divergent sum of weights with a
    convergent sum of squares.
    """

    exponent: float = DEFAULT_EXPONENT

    def __post_init__(self):
        if not 0.5 < self.exponent <= 1:
            raise InvalidArgument("weight exponent must lie in (0.5, 1]")

    def weight(self, i: int) -> float:
        if i < 1:
            raise InvalidArgument("weights are indexed from 1")
        return (i + 1.0) ** -self.exponent

    def weights(self, n: int) -> np.ndarray:
        """``w_1, ..., w_n``."""
        return (np.arange(2, n + 2, dtype=float)) ** -self.exponent


@dataclass(frozen=True, eq=False)
class PrRun:
    density: GridDensity
    log_predictive: np.ndarray = field(repr=False)
    kernel: Kernel
    schedule: WeightSchedule
    data_order: np.ndarray = field(repr=False)

    @property
    def log_likelihood(self) -> float:
        """Sum of the one-step-ahead log predictive densities."""
        return float(self.log_predictive.sum())

    def mixture_density(self, y) -> np.ndarray:
        """The fitted mixture ``f_n(y)``."""
        K = self.kernel.matrix(y, self.density.grid)
        return K @ (self.density.grid.quad_weights * self.density.values)


def _update(p, column, qw, w):
    prod = column * p
    f = float(prod @ qw)
    if not f >= PREDICTIVE_FLOOR:
        raise DegeneratePredictive(f"predictive density {f!r} below floor")
    return (1.0 - w) * p + (w / f) * prod, f


def pr_step(p_prev: GridDensity, y: float, w: float, k: Kernel):
    """One recursion step; returns ``(p_new, predictive)``."""
    if not 0 < w < 1:
        raise InvalidArgument("step weight must lie in (0, 1)")
    grid = p_prev.grid
    column = k.column(y, grid)
    values, f = _update(p_prev.values, column, grid.quad_weights, w)
    return GridDensity(grid, values), f


@numba.njit(cache=True)
def _fold(K, orders, p0, qw, w, P, logf):
    M, n = orders.shape
    G = p0.shape[0]
    for m in range(M):
        for j in range(G):
            P[m, j] = p0[j]
        for i in range(n):
            r = orders[m, i]
            f = 0.0
            for j in range(G):
                f += K[r, j] * P[m, j] * qw[j]
            if not f >= 1e-300:
                return m, i
            logf[m, i] = np.log(f)
            a = 1.0 - w[i]
            b = w[i] / f
            for j in range(G):
                P[m, j] = P[m, j] * (a + b * K[r, j])
    return -1, -1


def fold_orders(K, orders, p0_values, quad_weights, weights):
    """Run the recursion for several data orders at once.

    Parameters
    ----------
    K : (n, G) array
        Kernel columns, row ``r`` for observation ``r``.
    orders : (M, n) integer array
        Each row is the processing order (a permutation of ``0..n-1``).
    p0_values, quad_weights : (G,) arrays
    weights : (n,) array
        ``w_1..w_n``.

    Returns
    -------
    P : (M, G) final density values
    logf : (M, n) log predictive values, in processing order
    """
    K = np.ascontiguousarray(K, dtype=float)
    orders = np.ascontiguousarray(np.atleast_2d(orders), dtype=np.int64)
    M, n = orders.shape
    G = K.shape[1]
    if n != weights.shape[0] or p0_values.shape[0] != G:
        raise InvalidArgument("shape mismatch between data, weights and grid")
    P = np.empty((M, G))
    logf = np.empty((M, n))
    m, i = _fold(
        K, orders, np.ascontiguousarray(p0_values, dtype=float),
        np.ascontiguousarray(quad_weights, dtype=float),
        np.ascontiguousarray(weights, dtype=float), P, logf,
    )
    if m >= 0:
        raise DegeneratePredictive(
            f"predictive density below floor at step {i + 1} "
            f"(observation index {orders[m, i]}) of order {m}",
            step=i + 1, replicate=m,
        )
    return P, logf


def _check_data(data):
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise InvalidArgument("data must be a nonempty 1-D sequence")
    return data


def check_permutation(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.shape != (n,) or not np.issubdtype(perm.dtype, np.integer):
        raise InvalidArgument(f"permutation must be {n} integers")
    if not np.array_equal(np.sort(perm), np.arange(n)):
        raise InvalidArgument("not a permutation of 0..n-1")
    return perm.astype(np.int64)


def pr_run_permuted(data, perm, p0: GridDensity, schedule: WeightSchedule, k: Kernel) -> PrRun:
    """Run the recursion on ``data[perm]``.

    ``perm`` is a 0-based permutation of ``range(len(data))``.
    """
    data = _check_data(data)
    perm = check_permutation(perm, data.size)
    grid = p0.grid
    K = k.matrix(data, grid)
    P, logf = fold_orders(K, perm[None, :], p0.values, grid.quad_weights,
                          schedule.weights(data.size))
    return PrRun(GridDensity(grid, P[0]), logf[0], k, schedule, perm)


def pr_run(data, p0: GridDensity, schedule: WeightSchedule, k: Kernel) -> PrRun:
    """Run the recursion over ``data`` in its given order."""
    data = _check_data(data)
    return pr_run_permuted(data, np.arange(data.size), p0, schedule, k)


def pr_run_stepwise(data, p0: GridDensity, schedule: WeightSchedule, k: Kernel) -> PrRun:
    """Same as :func:`pr_run` but built from repeated :func:`pr_step` calls."""
    data = _check_data(data)
    p = p0
    logf = np.empty(data.size)
    for i, y in enumerate(data, start=1):
        try:
            p, f = pr_step(p, y, schedule.weight(i), k)
        except DegeneratePredictive as exc:
            raise DegeneratePredictive(f"{exc} at step {i}", step=i) from None
        logf[i - 1] = np.log(f)
    return PrRun(p, logf, k, schedule, np.arange(data.size))


def default_initial(grid: GridMeasure) -> GridDensity:
    """Uniform density over the grid's support."""
    return GridDensity.uniform(grid)
