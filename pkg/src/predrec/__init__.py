"""Predictive recursion for nonparametric mixing densities, with
permutation-based uncertainty quantification."""

from .errors import DegeneratePredictive, DomainError, InvalidArgument
from .functionals import Functional, apply_functional
from .grid import GridDensity, GridMeasure, cumulative_integral, integrate, make_grid
from .kernels import (
    CustomKernel,
    GammaKernel,
    Kernel,
    NormalKernel,
    ScaledTKernel,
    TabulatedKernel,
    kernel_column,
    parse_kernel,
)
from .permutation import (
    IntervalEstimate,
    PermEnsemble,
    PermutationPlan,
    build_ensemble,
    ensemble_variance,
    quantile_interval,
    sample_permutation,
    verify_identity,
)
from .recursion import PrRun, WeightSchedule, pr_run, pr_run_permuted, pr_step

__version__ = "0.1.0"
