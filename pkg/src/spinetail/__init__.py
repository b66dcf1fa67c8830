"""Tail probabilities of maxima on weighted branching trees.

The endogenous solution of ``W = max(Y, max_i (X_i + W_i))`` is the maximum
of a perturbed branching random walk.  This package estimates ``P(W > t)``
with an unbiased spine importance sampler whose relative error stays bounded
as t grows, plus independent cross-checks: naive truncated-tree Monte Carlo,
a population-dynamics pool, and two estimators of the tail constant H in
``P(W > t) ~ H exp(-alpha t)``.
"""

from .errors import (
    BudgetExceededError,
    DomainError,
    EmptyFrontierError,
    EmptySampleError,
    MissingIngredientsError,
    NonBoundedModelError,
    NonPositiveDriftError,
    NoRootError,
    NotDegenerateQError,
    NoTiltAvailableError,
    RecursionBudgetError,
    SpinetailError,
    SumBoundViolatedError,
    ZeroSpineWeightError,
)
from .laws import (
    DegenerateQ,
    FixedCount,
    GeometricCount,
    ParetoQ,
    TruncatedPoisson,
    UniformCount,
)
from .models import (
    BranchingMM1,
    BranchingVector,
    CustomModel,
    DiscreteTable,
    EfficiencyReport,
    ExpPoisson,
    GammaGeometric,
    IdenticalPareto,
    Model,
    NonBranchingExp,
    SimplexGamma,
    TiltContext,
    choose_spine_child,
    drift_mu,
    inverse_mass_identity,
    mellin,
    q_efficiency_check,
    sample_p,
    sample_tilted,
    solve_alpha,
    tilt_ar_bounded_sample,
    tilt_ar_sumbound_sample,
    tilt_mixture_sample,
)
from .oracle import (
    CLBoundRow,
    WPool,
    cl_bound_check,
    estimate_H_equiv,
    estimate_H_spine,
    load_pool,
    naive_tail,
    naive_truncation_bound,
    naive_w_sample,
    pool_tail,
    popdyn_pool,
    save_pool,
)
from .replication import (
    EstimateSummary,
    SeedSpec,
    aggregate,
    run_replications,
    summarize_values,
)
from .sampler import (
    EstimatorVariant,
    ISRun,
    is_estimate,
    run_single,
    terminal_generation_profile,
)
from .tree import (
    Frontier,
    NodeIndex,
    NodeState,
    ROOT,
    child,
    generation,
    lenlex_compare,
    lenlex_key,
    truncate,
)

__version__ = "0.1.0"
