"""Simulation harness for the nine kernel x mixing-density examples.

Example ``a-b`` pairs kernel ``a`` with mixing density ``b``:

kernels
    1. ``N(y | x, 0.5**2)``
    2. ``t((y - x) / 0.3 | df=5) / 0.3``
    3. ``Gamma(y | shape=20x, rate=20)``
mixing densities (all truncated to [0, 10])
    1. ``Beta(x / 10 | 5, 5) / 10``
    2. ``0.75 N(x | 3, 0.8**2) + 0.25 N(x | 7, 0.8**2)``
    3. ``Gamma(x | shape=2, rate=1)``

Latent values are drawn by rejection into [0, 10] and the true-value
oracles renormalize over [0, 10], since the recursion started from a
uniform density on [0, 10] can only estimate the truncated truth.

Every replication ``r`` of a run with master seed ``s`` takes its data
from ``SeedSequence(s, spawn_key=(r, 0))`` and its permutation seed from
``SeedSequence(s, spawn_key=(r, 1))``.
"""

from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import DegeneratePredictive, DomainError, InvalidArgument
from .functionals import CDF_AT, DENSITY_AT, MEAN, Functional
from .grid import GridDensity, GridMeasure, make_grid
from .kernels import GammaKernel, Kernel, NormalKernel, ScaledTKernel
from .permutation import PermutationPlan, interval_bounds, permuted_densities
from .recursion import WeightSchedule, pr_run

log = logging.getLogger(__name__)

SUPPORT = (0.0, 10.0)
GAMMA_KERNEL_MIN_X = 1e-6
DEFAULT_X_VALUES = (2.0, 5.0, 8.0)
DEFAULT_REPS = 200


def default_grid() -> GridMeasure:
    return make_grid("lebesgue", *SUPPORT, 1001)


class MixingDensity:
    """A mixing distribution truncated to :data:`SUPPORT`."""

    name = "mixing"

    def _pdf(self, x):
        raise NotImplementedError

    def _cdf(self, x):
        raise NotImplementedError

    def _draw(self, size, rng):
        raise NotImplementedError

    @property
    def mass(self) -> float:
        """Untruncated mass inside the support."""
        a, b = SUPPORT
        return float(self._cdf(b) - self._cdf(a))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= SUPPORT[0]) & (x <= SUPPORT[1])
        return np.where(inside, self._pdf(x), 0.0) / self.mass

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), *SUPPORT)
        return (self._cdf(x) - self._cdf(SUPPORT[0])) / self.mass

    def mean(self) -> float:
        val, _ = integrate.quad(lambda t: t * self._pdf(t), *SUPPORT, limit=200)
        return val / self.mass

    def sample(self, size: int, rng: np.random.Generator, min_x: float = 0.0) -> np.ndarray:
        """Rejection sampler into ``[max(min_x, 0), 10]``."""
        lo, hi = max(min_x, SUPPORT[0]), SUPPORT[1]
        out = np.empty(0)
        while out.size < size:
            need = size - out.size
            x = self._draw(int(need * 1.05) + 16, rng)
            out = np.concatenate([out, x[(x >= lo) & (x <= hi)][:need]])
        return out


class BetaMixing(MixingDensity):
    name = "beta(5,5) on [0,10]"

    def __init__(self):
        self._d = stats.beta(5, 5, scale=10)

    def _pdf(self, x):
        return self._d.pdf(x)

    def _cdf(self, x):
        return self._d.cdf(x)

    def _draw(self, size, rng):
        return 10.0 * rng.beta(5, 5, size)


class NormalMixtureMixing(MixingDensity):
    name = "0.75 N(3,0.8^2) + 0.25 N(7,0.8^2)"
    weights = (0.75, 0.25)
    means = (3.0, 7.0)
    sd = 0.8

    def _pdf(self, x):
        return sum(w * stats.norm.pdf(x, m, self.sd) for w, m in zip(self.weights, self.means))

    def _cdf(self, x):
        return sum(w * stats.norm.cdf(x, m, self.sd) for w, m in zip(self.weights, self.means))

    def _draw(self, size, rng):
        comp = rng.random(size) < self.weights[0]
        mu = np.where(comp, self.means[0], self.means[1])
        return mu + self.sd * rng.standard_normal(size)


class GammaMixing(MixingDensity):
    name = "gamma(shape 2, rate 1)"

    def _pdf(self, x):
        return stats.gamma.pdf(x, 2)

    def _cdf(self, x):
        return stats.gamma.cdf(x, 2)

    def _draw(self, size, rng):
        return rng.gamma(2.0, 1.0, size)


KERNELS = {
    1: lambda: NormalKernel(0.5),
    2: lambda: ScaledTKernel(5.0, 0.3),
    3: lambda: GammaKernel(20.0, 20.0),
}
MIXINGS = {1: BetaMixing, 2: NormalMixtureMixing, 3: GammaMixing}


@dataclass(frozen=True, eq=False)
class ExampleModel:
    kernel_id: int
    mixing_id: int
    kernel: Kernel = field(init=False, repr=False)
    mixing: MixingDensity = field(init=False, repr=False)

    def __post_init__(self):
        if self.kernel_id not in KERNELS or self.mixing_id not in MIXINGS:
            raise InvalidArgument(f"no example {self.kernel_id}-{self.mixing_id}")
        object.__setattr__(self, "kernel", KERNELS[self.kernel_id]())
        object.__setattr__(self, "mixing", MIXINGS[self.mixing_id]())

    @classmethod
    def from_label(cls, label: str) -> ExampleModel:
        """Parse ``"a-b"``."""
        try:
            a, b = (int(s) for s in str(label).split("-"))
        except ValueError:
            raise InvalidArgument(f"example id must look like '3-3', got {label!r}") from None
        return cls(a, b)

    @property
    def label(self) -> str:
        return f"{self.kernel_id}-{self.mixing_id}"

    @property
    def min_x(self) -> float:
        return GAMMA_KERNEL_MIN_X if isinstance(self.kernel, GammaKernel) else 0.0


def all_examples() -> list[ExampleModel]:
    return [ExampleModel(a, b) for b in (1, 2, 3) for a in (1, 2, 3)]


def sample_mixture(model: ExampleModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``X_i`` from the mixing density, then ``Y_i`` from ``k(. | X_i)``."""
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    x = model.mixing.sample(n, rng, min_x=model.min_x)
    return model.kernel.sample(x, rng)


def true_functional(model: ExampleModel, psi: Functional) -> float:
    """True value of ``psi`` under the truncated mixing density."""
    m = model.mixing
    if psi.tag == DENSITY_AT:
        return float(m.pdf(psi.x0))
    if psi.tag == CDF_AT:
        return float(m.cdf(psi.x0))
    if psi.tag == MEAN:
        return m.mean()
    raise InvalidArgument(f"no true value available for functional {psi.tag!r}")


def replication_rngs(seed: int, r: int):
    """``(data_rng, permutation_seed)`` for replication ``r``."""
    data_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r, 0)))
    return data_rng, derived_seed(seed, r, 1)


def replication_data(model: ExampleModel, n: int, seed: int, r: int) -> np.ndarray:
    return sample_mixture(model, n, replication_rngs(seed, r)[0])


def sampling_distribution(model: ExampleModel, psi, n: int, R: int, seed: int = 0,
                          grid: GridMeasure | None = None,
                          schedule: WeightSchedule | None = None) -> np.ndarray:
    """``psi`` of the original-order estimate over ``R`` independent datasets.

    ``psi`` may also be a list of functionals evaluated on the same
    datasets, giving an ``(R, len(psi))`` array.
    """
    if R < 2:
        raise InvalidArgument("need R >= 2 replications")
    grid = grid or default_grid()
    schedule = schedule or WeightSchedule()
    p0 = GridDensity.uniform(grid)
    many = not isinstance(psi, Functional)
    funcs = list(psi) if many else [psi]
    out = np.empty((R, len(funcs)))
    for r in range(R):
        data = replication_data(model, n, seed, r)
        values = pr_run(data, p0, schedule, model.kernel).density.values
        out[r] = [f.evaluate(grid, values) for f in funcs]
    return out if many else out[:, 0]


@dataclass(frozen=True)
class CoverageCell:
    example: str
    n: int
    target: str
    truth: float
    reps: int
    hits: int
    failed: int
    mean_width: float

    @property
    def coverage(self) -> float:
        return self.hits / self.reps if self.reps else float("nan")


@dataclass
class CoverageReport:
    cells: list[CoverageCell]
    level: float
    wall_time: float = 0.0

    def get(self, example: str, n: int, target: str) -> CoverageCell:
        for c in self.cells:
            if (c.example, c.n, c.target) == (example, n, target):
                return c
        raise KeyError((example, n, target))

    def extend(self, other: CoverageReport) -> None:
        self.cells.extend(other.cells)
        self.wall_time += other.wall_time


def _coverage_replication(model, n, seed, r, functionals, grid, schedule, plan_M,
                          include_identity, level):
    data_rng, perm_seed = replication_rngs(seed, r)
    plan = PermutationPlan(plan_M, perm_seed, include_identity)
    try:
        data = sample_mixture(model, n, data_rng)
        _, P = permuted_densities(data, GridDensity.uniform(grid), schedule, model.kernel, plan)
    except (DegeneratePredictive, DomainError) as exc:
        log.warning("replication %d of %s failed: %s", r, model.label, exc)
        return None
    vals = np.stack([np.asarray(psi.evaluate(grid, P)) for psi in functionals])
    return interval_bounds(vals, level)


def _run_one(args):
    return _coverage_replication(*args)


def run_coverage(model: ExampleModel, x_values=DEFAULT_X_VALUES, n: int = 500,
                 R: int = DEFAULT_REPS, plan: PermutationPlan | None = None,
                 level: float = 0.95, seed: int = 0, *, functionals=None, truths=None,
                 grid: GridMeasure | None = None, schedule: WeightSchedule | None = None,
                 workers: int = 1) -> CoverageReport:
    """Estimate coverage of permutation intervals for ``p(x)`` at each x.

    ``plan`` supplies ``M`` and ``include_identity``; its seed is ignored
    because each replication derives its own permutation seed from
    ``seed``. Pass ``functionals`` (and matching ``truths``) to score
    targets other than the density at ``x_values``.
    """
    if R < 1:
        raise InvalidArgument("need R >= 1 replications")
    plan = plan or PermutationPlan()
    grid = grid or default_grid()
    schedule = schedule or WeightSchedule()
    if functionals is None:
        functionals = [Functional.density_at(x) for x in x_values]
        for psi in functionals:
            grid.index_of(psi.x0)
    functionals = list(functionals)
    if truths is None:
        truths = [true_functional(model, psi) for psi in functionals]
    if len(truths) != len(functionals):
        raise InvalidArgument("need one true value per functional")
    truths = np.asarray(truths, dtype=float)

    t0 = time.perf_counter()
    jobs = [(model, n, seed, r, functionals, grid, schedule, plan.M, plan.include_identity,
             level) for r in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, R // (4 * workers))))
    else:
        results = [_run_one(j) for j in jobs]
    wall = time.perf_counter() - t0

    ok = [res for res in results if res is not None]
    failed = R - len(ok)
    if failed:
        warnings.warn(f"{failed} of {R} replications failed for example {model.label}")
    cells = []
    for t, psi in enumerate(functionals):
        if ok:
            lo = np.array([res[0][t] for res in ok])
            hi = np.array([res[1][t] for res in ok])
            hits = int(np.sum((lo <= truths[t]) & (truths[t] <= hi)))
            width = float(np.mean(hi - lo))
        else:
            hits, width = 0, float("nan")
        target = f"{psi.x0:g}" if psi.tag == DENSITY_AT else psi.label
        cells.append(CoverageCell(model.label, n, target, float(truths[t]), len(ok), hits,
                                  failed, width))
    return CoverageReport(cells, level, wall)


def derived_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed determined by ``seed`` and the integer ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])
