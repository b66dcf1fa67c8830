"""Exception types raised across the package."""


class SpinetailError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SpinetailError):
    """Moment function evaluated outside its convergence region."""


class NoRootError(SpinetailError):
    """The tail-exponent equation has no root on the searchable domain."""


class NonPositiveDriftError(SpinetailError):
    """A root of the tail-exponent equation exists but the spine drift is
    not positive, so the tilted walk does not cross high levels."""

    def __init__(self, alpha: float, mu: float):
        self.alpha = alpha
        self.mu = mu
        super().__init__(
            f"root alpha={alpha:.6g} found but drift mu={mu:.6g} <= 0"
        )


class ZeroSpineWeightError(SpinetailError):
    """All child weights vanish at a spine node (sum C_i^alpha = 0)."""


class NoTiltAvailableError(SpinetailError):
    """The model has no tilted sampler and no generic strategy applies."""


class MissingIngredientsError(SpinetailError):
    """The mixture tilt strategy lacks the per-model ingredients it needs."""


class NonBoundedModelError(SpinetailError):
    """A drawn weight exceeded the bound the acceptance-rejection tilt
    was promised, invalidating its premise."""


class SumBoundViolatedError(SpinetailError):
    """The drawn weight mass sum C_i^alpha exceeded the promised bound."""


class BudgetExceededError(SpinetailError):
    """A single replication expanded more nodes than its budget allows."""

    def __init__(self, nodes_expanded: int, node_budget: int):
        self.nodes_expanded = nodes_expanded
        self.node_budget = node_budget
        super().__init__(
            f"expanded {nodes_expanded} nodes, budget {node_budget}"
        )


class RecursionBudgetError(SpinetailError):
    """Expected truncated-tree size exceeds the configured cap."""


class NotDegenerateQError(SpinetailError):
    """An operation requiring a constant perturbation got a random one."""


class EmptyFrontierError(SpinetailError):
    """The traversal frontier was exhausted; with at least one offspring
    per node this indicates an algorithm logic error."""


class EmptySampleError(SpinetailError):
    """Aggregation was asked to summarize zero usable replications."""
