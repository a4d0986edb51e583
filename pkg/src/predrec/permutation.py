"""Permutation ensembles of predictive recursion estimates.

Rerunning the recursion on random reorderings of one dataset gives a
spread of estimates whose variance tracks the sampling variance of the
estimator. Quantiles of that spread give confidence intervals, and its
mean is the order-averaged estimate.

Seeding
-------
Replicate ``m`` of a plan with seed ``s`` draws its permutation from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(m,)))``. With
``include_identity`` replicate 0 is the original order and uses no draw.
Replicates therefore do not depend on each other or on evaluation order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePredictive, InvalidArgument
from .functionals import Functional
from .grid import COUNTING, GridDensity
from .kernels import Kernel
from .recursion import WeightSchedule, fold_orders

DEFAULT_PERMUTATIONS = 200


@dataclass(frozen=True)
class PermutationPlan:
    M: int = DEFAULT_PERMUTATIONS
    rng_seed: int = 0
    include_identity: bool = True

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise InvalidArgument("a permutation plan needs M >= 2")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise InvalidArgument("rng_seed must be a nonnegative integer")

    def replicate_rng(self, m: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(int(self.rng_seed), spawn_key=(m,)))

    def orders(self, n: int) -> np.ndarray:
        """The ``(M, n)`` array of processing orders."""
        out = np.empty((self.M, n), dtype=np.int64)
        for m in range(self.M):
            if m == 0 and self.include_identity:
                out[m] = np.arange(n)
            else:
                out[m] = sample_permutation(n, self.replicate_rng(m))
        return out


def sample_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random permutation of ``0..n-1`` (Fisher-Yates via numpy)."""
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    return rng.permutation(n)


@dataclass(frozen=True, eq=False)
class PermEnsemble:
    values: np.ndarray
    plan: PermutationPlan
    functional: Functional
    orders: np.ndarray = field(repr=False)
    densities: np.ndarray | None = field(default=None, repr=False)
    grid: object = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return self.values.size

    def density(self, m: int) -> GridDensity:
        if self.densities is None:
            raise InvalidArgument("ensemble was built without densities")
        return GridDensity(self.grid, self.densities[m])

    def mean_density(self) -> GridDensity:
        """Pointwise average of the permuted densities."""
        if self.densities is None:
            raise InvalidArgument("ensemble was built without densities")
        return GridDensity(self.grid, self.densities.mean(axis=0))


@dataclass(frozen=True)
class IntervalEstimate:
    lower: float
    upper: float
    level: float
    point: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise InvalidArgument("interval needs lower <= upper")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def permuted_densities(data, p0: GridDensity, schedule: WeightSchedule, k: Kernel,
                       plan: PermutationPlan):
    """Final densities for every replicate of ``plan``.

    Returns ``(orders, P)`` with ``P`` of shape ``(M, G)``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise InvalidArgument("data must be a nonempty 1-D sequence")
    grid = p0.grid
    orders = plan.orders(data.size)
    K = k.matrix(data, grid)
    try:
        P, _ = fold_orders(K, orders, p0.values, grid.quad_weights, schedule.weights(data.size))
    except DegeneratePredictive as exc:
        raise DegeneratePredictive(
            f"replicate {exc.replicate}: {exc}", step=exc.step, replicate=exc.replicate
        ) from None
    return orders, P


def build_ensemble(data, p0: GridDensity, schedule: WeightSchedule, k: Kernel,
                   psi: Functional, plan: PermutationPlan | None = None,
                   keep_densities: bool = False) -> PermEnsemble:
    plan = plan or PermutationPlan()
    orders, P = permuted_densities(data, p0, schedule, k, plan)
    values = np.asarray(psi.evaluate(p0.grid, P), dtype=float)
    return PermEnsemble(values, plan, psi, orders,
                        P if keep_densities else None, p0.grid)


def ensemble_variance(e) -> float:
    """Sample variance (divisor ``M - 1``) of the ensemble values.

    Accepts a :class:`PermEnsemble` or a plain array of values.
    """
    v = np.asarray(getattr(e, "values", e), dtype=float)
    if v.size < 2:
        raise InvalidArgument("variance needs at least two values")
    return float(v.var(ddof=1))


def _rank(q, M):
    # ceil(q*M) with a guard against q*M landing just above an integer
    return min(max(math.ceil(q * M - 1e-9), 1), M)


def quantile_interval(e, level: float = 0.95) -> IntervalEstimate:
    """Order-statistic interval at ranks ``ceil(a/2 M)`` and ``ceil((1-a/2) M)``.

    ``point`` is the ensemble mean.
    """
    if not 0 < level < 1:
        raise InvalidArgument("level must lie in (0, 1)")
    v = np.sort(np.asarray(getattr(e, "values", e), dtype=float))
    M = v.size
    if M < 2:
        raise InvalidArgument("interval needs at least two values")
    alpha = 1.0 - level
    lo = v[_rank(alpha / 2, M) - 1]
    hi = v[_rank(1 - alpha / 2, M) - 1]
    return IntervalEstimate(float(lo), float(hi), float(level), float(v.mean()))


def interval_bounds(values, level: float = 0.95):
    """Vectorized :func:`quantile_interval` bounds over the last axis."""
    v = np.sort(np.asarray(values, dtype=float), axis=-1)
    M = v.shape[-1]
    alpha = 1.0 - level
    return v[..., _rank(alpha / 2, M) - 1], v[..., _rank(1 - alpha / 2, M) - 1]


@dataclass(frozen=True)
class IdentityReport:
    """Exact variances from enumerating every dataset and every order."""

    sampling_variance: float      # over datasets, original order
    joint_variance: float         # over datasets and uniform orders
    mean_conditional_variance: float
    variance_of_conditional_means: float

    @property
    def identity_gap(self) -> float:
        return abs(self.sampling_variance - self.joint_variance)

    @property
    def decomposition_gap(self) -> float:
        return abs(self.joint_variance - self.mean_conditional_variance
                   - self.variance_of_conditional_means)


ENUMERATION_BUDGET = 10**5


def verify_identity(outcome_probs, n: int, p0: GridDensity, schedule: WeightSchedule,
                    k: Kernel, psi: Functional) -> IdentityReport:
    """Enumerate all datasets of size ``n`` and all their orderings.

    ``outcome_probs[y]`` is the probability of observation ``y``; ``k`` must
    accept the outcome labels ``0..len(outcome_probs)-1`` (for example a
    :class:`~predrec.kernels.TabulatedKernel`).
    """
    probs = np.asarray(outcome_probs, dtype=float)
    if p0.grid.measure_kind != COUNTING:
        raise InvalidArgument("exact enumeration needs a counting grid")
    if n < 1 or probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
        raise InvalidArgument("need n >= 1 and a probability vector")
    n_perm = math.factorial(n)
    if probs.size**n * n_perm > ENUMERATION_BUDGET:
        raise InvalidArgument("enumeration budget exceeded")

    grid = p0.grid
    w = schedule.weights(n)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    datasets = list(itertools.product(range(probs.size), repeat=n))
    data_prob = np.array([np.prod(probs[list(d)]) for d in datasets])
    # psi of every (dataset, ordering); itertools puts the identity first
    psi_vals = np.empty((len(datasets), n_perm))
    for r, d in enumerate(datasets):
        K = k.matrix(np.array(d, dtype=float), grid)
        P, _ = fold_orders(K, perms, p0.values, grid.quad_weights, w)
        psi_vals[r] = psi.evaluate(grid, P)

    def wvar(x, wts):
        mu = wts @ x
        return float(wts @ (x - mu) ** 2)

    sampling = wvar(psi_vals[:, 0], data_prob)
    joint_w = np.repeat(data_prob / n_perm, n_perm)
    joint = wvar(psi_vals.ravel(), joint_w)
    cond_mean = psi_vals.mean(axis=1)
    cond_var = ((psi_vals - cond_mean[:, None]) ** 2).mean(axis=1)
    return IdentityReport(sampling, joint, float(data_prob @ cond_var),
                          wvar(cond_mean, data_prob))
