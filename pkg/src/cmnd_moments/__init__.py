"""Moments of the centered complex multivariate normal distribution.

Independent evaluators cross-check each other.  A sparsity-based detector
proves some moments zero before any evaluation.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DimensionMismatch,
    GaussianRational,
    HermitianCovariance,
    Mode,
    MomentError,
    MomentValue,
    MultiIndex,
    NonPositiveDiagonal,
    NotHermitian,
    SigmaPolynomial,
    UnbalancedDegrees,
    total_degrees,
    validate_covariance,
)
from .sparsity import NullReason, NullVerdict, SparsityStructure, build_sparsity, null_verdict  # noqa: E402
from .index_set import (  # noqa: E402
    bounds,
    brute_force_margin_matrices,
    enumerate_index_set,
    split_index_set,
)
from .closed_form import moment_closed_form, term_value  # noqa: E402
from .recurrence import (  # noqa: E402
    RecurrenceCache,
    build_recurrence_system,
    check_linear_combination_annihilation,
    moment_recurrence,
)
from .oracles import McEstimate, moment_monte_carlo, moment_permanent, sample_cmnd  # noqa: E402
