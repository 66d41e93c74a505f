"""Learning Koopman-Nemytskii operators of controlled systems from snapshots."""

from .errors import ConfigurationError, FitError, InputError, KoopnemError, SimulationError
from .kernels import (
    PiecewisePolynomial,
    PolicyKernelSpec,
    RadialKernelSpec,
    build_wendland,
    kernel_eval,
    policy_kernel_eval,
    product_kernel_eval,
)
from .gram import GramSet, SnapshotDataset, assemble, fill_distance, sparsity
from .learning import (
    LearnedOperator,
    RRRSolution,
    empirical_loss,
    fit,
    fit_kernel_edmd,
    fit_rrr,
    generalization_bound,
)

__version__ = "0.1.0"
