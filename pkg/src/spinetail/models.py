"""Branching-vector laws, their spine tilts, and the tail-exponent solver.

A model describes the law of one branching vector ``(N, Q, C_1, ..., C_N)``:
the offspring count, the perturbation factor, and the child weights.  Each
built-in knows its moment function ``m(s) = E[sum_i C_i^s]`` in closed form,
can draw the vector under the original measure, and can draw it under the
spine tilt, whose density with respect to the original law is
``D = sum_i C_i^alpha``.

The tail exponent ``alpha`` is the root of ``m(alpha) = 1`` where the moment
function crosses one from below; the associated spine drift
``mu = E[sum_i C_i^alpha log C_i] = m'(alpha)`` must then be positive, which
is what makes the tilted spine walk cross any level in finite time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammaln

from .errors import (
    DomainError,
    MissingIngredientsError,
    NonBoundedModelError,
    NonPositiveDriftError,
    NoRootError,
    NoTiltAvailableError,
    SumBoundViolatedError,
    ZeroSpineWeightError,
)
from .laws import (
    DegenerateQ,
    FixedCount,
    GeometricCount,
    OffspringLaw,
    ParetoQ,
    PerturbationLaw,
    TruncatedPoisson,
    UniformCount,
)

ROOT_TOL = 1e-10
_FD_STEP = 1e-5
_PROB_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class BranchingVector:
    """One realization of the branching vector: Q and the weights C_1..C_N."""

    q: float
    weights: tuple[float, ...]

    @property
    def n_offspring(self) -> int:
        return len(self.weights)

    def spine_mass(self, alpha: float) -> float:
        """D = sum_i C_i^alpha, the tilt density of this realization."""
        return sum(c**alpha for c in self.weights)


@dataclass(frozen=True)
class TiltContext:
    """Solved tail exponent, spine drift, and per-model tilt parameters."""

    alpha: float
    mu: float
    params: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class MixtureIngredients:
    """Hooks for the mixture tilt: draw the tilted count, draw the tilted
    coordinate, then fill in the remaining coordinates and Q conditionally
    under the original measure.  Component probabilities are uniform, which
    covers the i.i.d. and the identical-weights cases."""

    sample_n_tilted: Callable[[np.random.Generator], int]
    sample_coord_tilted: Callable[[np.random.Generator], float]
    fill_given_coord: Callable[
        [np.random.Generator, int, int, float], BranchingVector
    ]


class Model:
    """Base class: law of the generic branching vector."""

    #: True when Q is independent of (N, C_1, C_2, ...).
    q_independent: bool = False

    # -- sampling under the original measure --------------------------------

    def sample_p(self, rng: np.random.Generator) -> BranchingVector:
        raise NotImplementedError

    def sample_p_batch(
        self, rng: np.random.Generator, m: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """m draws as (counts, qs, weights_flat); children are contiguous."""
        counts = np.empty(m, dtype=np.int64)
        qs = np.empty(m)
        chunks = []
        for i in range(m):
            v = self.sample_p(rng)
            counts[i] = v.n_offspring
            qs[i] = v.q
            chunks.append(v.weights)
        flat = np.concatenate([np.asarray(c) for c in chunks])
        return counts, qs, flat

    def sample_p_given_n(
        self, n: int, rng: np.random.Generator
    ) -> tuple[float, tuple[float, ...]]:
        """(Q, C_1..C_n) from the conditional original law given N = n."""
        raise MissingIngredientsError(
            f"{type(self).__name__} does not expose conditional sampling "
            "given the offspring count"
        )

    # -- sampling under the spine tilt ---------------------------------------

    def sample_tilted(
        self, ctx: TiltContext, rng: np.random.Generator
    ) -> BranchingVector:
        raise NoTiltAvailableError(
            f"{type(self).__name__} has no closed-form tilted sampler; "
            "attach one or use a generic tilt strategy"
        )

    def sample_tilted_n(self, ctx: TiltContext, rng: np.random.Generator) -> int:
        """Draw the offspring count from its marginal law under the tilt."""
        raise MissingIngredientsError(
            f"{type(self).__name__} does not expose the tilted count marginal"
        )

    def mixture_ingredients(self, ctx: TiltContext) -> MixtureIngredients | None:
        return None

    # -- moment functions ----------------------------------------------------

    def mellin(self, s: float) -> float:
        """E[sum_i C_i^s]; raises DomainError outside the analytic domain."""
        raise NotImplementedError

    def mellin_deriv(self, s: float) -> float | None:
        """d/ds E[sum_i C_i^s] where a closed form is known, else None."""
        return None

    def mellin_domain(self) -> tuple[float, float]:
        """Open interval on which ``mellin`` converges."""
        return (0.0, math.inf)

    def exact_alpha(self) -> float | None:
        """Tail exponent when the model pins it down directly, else None."""
        return None

    # -- descriptive ----------------------------------------------------------

    def mean_offspring(self) -> float | None:
        return None

    def q_moment(self, s: float) -> float | None:
        """E[Q^s] where known analytically (inf when divergent), else None."""
        return None

    def q_min(self) -> float | None:
        """Essential infimum of Q when known, else None."""
        return None

    def q_degenerate(self) -> float | None:
        """The constant q when Q == q a.s., else None."""
        return None

    def make_context(self, alpha: float, mu: float) -> TiltContext:
        return TiltContext(alpha=alpha, mu=mu)

    def _check_domain(self, s: float) -> None:
        lo, hi = self.mellin_domain()
        if not lo < s < hi:
            raise DomainError(
                f"s={s:.6g} outside the moment domain ({lo:.6g}, {hi:.6g}) "
                f"of {type(self).__name__}"
            )


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def _exp_diff_weight(rng, rate_up: float, rate_down: float) -> float:
    """exp(A - B) with A ~ Exponential(rate_up), B ~ Exponential(rate_down)."""
    return math.exp(
        rng.standard_exponential() / rate_up
        - rng.standard_exponential() / rate_down
    )


@dataclass(frozen=True)
class NonBranchingExp(Model):
    """Single offspring with C = e^(A - B), A ~ Exp(theta), B ~ Exp(lam).

    This is the classical single-server queue increment; the tilt keeps the
    same family with rates (theta - alpha) and (lam + alpha), and the root is
    alpha = theta - lam.  Q is drawn independently from ``q_law``.
    """

    theta: float
    lam: float
    q_law: PerturbationLaw = DegenerateQ(1.0)
    q_independent = True

    def __post_init__(self):
        if self.theta <= 0 or self.lam <= 0:
            raise ValueError("rates must be > 0")

    def sample_p(self, rng):
        c = _exp_diff_weight(rng, self.theta, self.lam)
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,))

    def sample_p_batch(self, rng, m):
        counts = np.ones(m, dtype=np.int64)
        flat = np.exp(
            rng.standard_exponential(m) / self.theta
            - rng.standard_exponential(m) / self.lam
        )
        return counts, self.q_law.sample_batch(rng, m), flat

    def sample_p_given_n(self, n, rng):
        if n != 1:
            raise ValueError("offspring count is identically 1")
        v = self.sample_p(rng)
        return v.q, v.weights

    def sample_tilted(self, ctx, rng):
        c = _exp_diff_weight(rng, self.theta - ctx.alpha, self.lam + ctx.alpha)
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,))

    def sample_tilted_n(self, ctx, rng):
        return 1

    def mixture_ingredients(self, ctx):
        return MixtureIngredients(
            sample_n_tilted=lambda rng: 1,
            sample_coord_tilted=lambda rng: _exp_diff_weight(
                rng, self.theta - ctx.alpha, self.lam + ctx.alpha
            ),
            fill_given_coord=lambda rng, n, i, c: BranchingVector(
                q=self.q_law.sample(rng), weights=(c,)
            ),
        )

    def mellin(self, s):
        self._check_domain(s)
        return self.theta * self.lam / ((self.theta - s) * (self.lam + s))

    def mellin_deriv(self, s):
        self._check_domain(s)
        m = self.mellin(s)
        return m * (1.0 / (self.theta - s) - 1.0 / (self.lam + s))

    def mellin_domain(self):
        return (-self.lam, self.theta)

    def exact_alpha(self):
        # m(s) = 1 at s = theta - lam; only a valid tail root when positive
        if self.theta > self.lam:
            return self.theta - self.lam
        return None

    def mean_offspring(self):
        return 1.0

    def q_moment(self, s):
        return self.q_law.moment(s)

    def q_min(self):
        return self.q_law.min_value

    def q_degenerate(self):
        return self.q_law.degenerate_value


@dataclass(frozen=True)
class BranchingMM1(Model):
    """Branching single-server queue: i.i.d. weights C_i = e^(A_i - B_i)
    with A ~ Exp(theta), B ~ Exp(lam), offspring count truncated-Poisson
    (K | K > 0, K ~ Poisson(poisson_param)), and Q = e^Y with
    Y ~ Exp(y_rate), all independent.

    Under the tilt the count becomes Poisson(poisson_param) + 1 (its
    size-biased version), one uniformly chosen weight gets the tilted rates
    (theta - alpha, lam + alpha), the rest stay untouched, and Q is invariant.
    """

    theta: float
    lam: float
    poisson_param: float
    y_rate: float
    q_independent = True

    def __post_init__(self):
        if min(self.theta, self.lam, self.poisson_param, self.y_rate) <= 0:
            raise ValueError("all parameters must be > 0")
        object.__setattr__(self, "_n_law", TruncatedPoisson(self.poisson_param))
        object.__setattr__(self, "_q_law", ParetoQ(self.y_rate))

    def _weights(self, rng, n: int) -> tuple[float, ...]:
        x = rng.standard_exponential(2 * n)
        return tuple(np.exp(x[:n] / self.theta - x[n:] / self.lam).tolist())

    def sample_p(self, rng):
        n = self._n_law.sample(rng)
        return BranchingVector(q=self._q_law.sample(rng), weights=self._weights(rng, n))

    def sample_p_batch(self, rng, m):
        counts = self._n_law.sample_batch(rng, m)
        total = int(counts.sum())
        flat = np.exp(
            rng.standard_exponential(total) / self.theta
            - rng.standard_exponential(total) / self.lam
        )
        return counts, self._q_law.sample_batch(rng, m), flat

    def sample_p_given_n(self, n, rng):
        return self._q_law.sample(rng), self._weights(rng, n)

    def sample_tilted(self, ctx, rng):
        n = self.sample_tilted_n(ctx, rng)
        ws = list(self._weights(rng, n))
        i = int(rng.integers(n))
        ws[i] = _exp_diff_weight(rng, self.theta - ctx.alpha, self.lam + ctx.alpha)
        return BranchingVector(q=self._q_law.sample(rng), weights=tuple(ws))

    def sample_tilted_n(self, ctx, rng):
        return self._n_law.sample_size_biased(rng)

    def mixture_ingredients(self, ctx):
        def fill(rng, n, i, c):
            ws = list(self._weights(rng, n))
            ws[i] = c
            return BranchingVector(q=self._q_law.sample(rng), weights=tuple(ws))

        return MixtureIngredients(
            sample_n_tilted=lambda rng: self._n_law.sample_size_biased(rng),
            sample_coord_tilted=lambda rng: _exp_diff_weight(
                rng, self.theta - ctx.alpha, self.lam + ctx.alpha
            ),
            fill_given_coord=fill,
        )

    def mellin(self, s):
        self._check_domain(s)
        per = self.theta * self.lam / ((self.theta - s) * (self.lam + s))
        return self._n_law.mean * per

    def mellin_deriv(self, s):
        self._check_domain(s)
        m = self.mellin(s)
        return m * (1.0 / (self.theta - s) - 1.0 / (self.lam + s))

    def mellin_domain(self):
        return (-self.lam, self.theta)

    def mean_offspring(self):
        return self._n_law.mean

    def q_moment(self, s):
        return self._q_law.moment(s)

    def q_min(self):
        return 1.0

    @property
    def offspring_law(self) -> OffspringLaw:
        return self._n_law


@dataclass(frozen=True)
class IdenticalPareto(Model):
    """All weights equal a single C ~ Pareto(shape a, scale b), with the
    count and Q independent of it and of each other.

    Tilt: size-biased count, C ~ Pareto(a - alpha, b), Q invariant.
    """

    a: float
    b: float
    n_law: OffspringLaw = FixedCount(1)
    q_law: PerturbationLaw = DegenerateQ(1.0)
    q_independent = True

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Pareto shape and scale must be > 0")

    @staticmethod
    def _pareto(rng, shape: float, scale: float) -> float:
        return scale * (1.0 + rng.pareto(shape))

    def sample_p(self, rng):
        n = self.n_law.sample(rng)
        c = self._pareto(rng, self.a, self.b)
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,) * n)

    def sample_p_batch(self, rng, m):
        counts = self.n_law.sample_batch(rng, m)
        cs = self.b * (1.0 + rng.pareto(self.a, size=m))
        return counts, self.q_law.sample_batch(rng, m), np.repeat(cs, counts)

    def sample_p_given_n(self, n, rng):
        c = self._pareto(rng, self.a, self.b)
        return self.q_law.sample(rng), (c,) * n

    def sample_tilted(self, ctx, rng):
        n = self.n_law.sample_size_biased(rng)
        c = self._pareto(rng, self.a - ctx.alpha, self.b)
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,) * n)

    def sample_tilted_n(self, ctx, rng):
        return self.n_law.sample_size_biased(rng)

    def mixture_ingredients(self, ctx):
        # identical weights: the conditional fill copies the tilted coordinate
        return MixtureIngredients(
            sample_n_tilted=lambda rng: self.n_law.sample_size_biased(rng),
            sample_coord_tilted=lambda rng: self._pareto(
                rng, self.a - ctx.alpha, self.b
            ),
            fill_given_coord=lambda rng, n, i, c: BranchingVector(
                q=self.q_law.sample(rng), weights=(c,) * n
            ),
        )

    def mellin(self, s):
        self._check_domain(s)
        return self.n_law.mean * self.a * self.b**s / (self.a - s)

    def mellin_deriv(self, s):
        self._check_domain(s)
        return self.mellin(s) * (math.log(self.b) + 1.0 / (self.a - s))

    def mellin_domain(self):
        return (-math.inf, self.a)

    def mean_offspring(self):
        return self.n_law.mean

    def q_moment(self, s):
        return self.q_law.moment(s)

    def q_min(self):
        return self.q_law.min_value

    def q_degenerate(self):
        return self.q_law.degenerate_value


@dataclass(frozen=True)
class ExpPoisson(Model):
    """All weights equal a single C ~ Exponential(lam); given C the count is
    Poisson(C) + 1; Q is independent from ``q_law``.

    Tilt: the count follows
    ``P(n) = n lam Gamma(n + alpha) / ((n-1)! (lam+1)^(n+alpha))`` and given
    the count the weight is Gamma(count + alpha, lam + 1).
    """

    lam: float
    q_law: PerturbationLaw = DegenerateQ(1.0)
    q_independent = True

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("rate must be > 0")

    def sample_p(self, rng):
        c = rng.standard_exponential() / self.lam
        n = int(rng.poisson(c)) + 1
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,) * n)

    def sample_p_batch(self, rng, m):
        cs = rng.standard_exponential(m) / self.lam
        counts = (rng.poisson(cs) + 1).astype(np.int64)
        return counts, self.q_law.sample_batch(rng, m), np.repeat(cs, counts)

    def sample_p_given_n(self, n, rng):
        # posterior of C given the count: Gamma(n, lam + 1)
        c = rng.gamma(n) / (self.lam + 1.0)
        return self.q_law.sample(rng), (c,) * n

    def tilted_count_pmf(self, alpha: float, n: int) -> float:
        log_p = (
            math.log(n)
            + math.log(self.lam)
            + gammaln(n + alpha)
            - gammaln(n)
            - (n + alpha) * math.log(self.lam + 1.0)
        )
        return math.exp(log_p)

    def make_context(self, alpha, mu):
        probs = []
        acc = 0.0
        n = 1
        while acc < 1.0 - 1e-14 and n <= 100_000:
            p = self.tilted_count_pmf(alpha, n)
            probs.append(p)
            acc += p
            n += 1
        cum = np.cumsum(probs)
        cum[-1] = max(cum[-1], 1.0)
        return TiltContext(alpha=alpha, mu=mu, params={"tilted_n_cum": cum})

    def sample_tilted_n(self, ctx, rng):
        cum = ctx.params["tilted_n_cum"]
        return int(np.searchsorted(cum, rng.random(), side="right")) + 1

    def sample_tilted(self, ctx, rng):
        n = self.sample_tilted_n(ctx, rng)
        c = rng.gamma(n + ctx.alpha) / (self.lam + 1.0)
        return BranchingVector(q=self.q_law.sample(rng), weights=(c,) * n)

    def mellin(self, s):
        # E[N C^s] = E[(C + 1) C^s] with C ~ Exponential(lam)
        self._check_domain(s)
        log_a = gammaln(s + 2.0) - (s + 1.0) * math.log(self.lam)
        log_b = gammaln(s + 1.0) - s * math.log(self.lam)
        return _safe_exp(log_a) + _safe_exp(log_b)

    def mellin_deriv(self, s):
        self._check_domain(s)
        log_a = gammaln(s + 2.0) - (s + 1.0) * math.log(self.lam)
        log_b = gammaln(s + 1.0) - s * math.log(self.lam)
        loglam = math.log(self.lam)
        return _safe_exp(log_a) * (digamma(s + 2.0) - loglam) + _safe_exp(
            log_b
        ) * (digamma(s + 1.0) - loglam)

    def mellin_domain(self):
        return (-1.0, math.inf)

    def mean_offspring(self):
        return 1.0 + 1.0 / self.lam

    def q_moment(self, s):
        return self.q_law.moment(s)

    def q_min(self):
        return self.q_law.min_value

    def q_degenerate(self):
        return self.q_law.degenerate_value


@dataclass(frozen=True)
class GammaGeometric(Model):
    """Q ~ Gamma(2, beta), count N ~ Geometric(1/2) on {1, 2, ...}, both
    independent, and all weights equal a single C ~ Gamma(N + 1, 2Q).

    Tilt: Q ~ Gamma(2 - alpha, beta), then C ~ Gamma(alpha + 2, Q), then the
    count is Poisson(QC) + 1.  Requires alpha < 2, which the moment domain
    enforces.
    """

    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("rate must be > 0")
        object.__setattr__(self, "_n_law", GeometricCount(0.5))

    def sample_p(self, rng):
        n = self._n_law.sample(rng)
        q = rng.gamma(2.0) / self.beta
        c = rng.gamma(n + 1.0) / (2.0 * q)
        return BranchingVector(q=q, weights=(c,) * n)

    def sample_p_batch(self, rng, m):
        counts = self._n_law.sample_batch(rng, m)
        qs = rng.gamma(2.0, size=m) / self.beta
        cs = rng.gamma(counts + 1.0) / (2.0 * qs)
        return counts, qs, np.repeat(cs, counts)

    def sample_tilted(self, ctx, rng):
        q = rng.gamma(2.0 - ctx.alpha) / self.beta
        c = rng.gamma(ctx.alpha + 2.0) / q
        n = int(rng.poisson(q * c)) + 1
        return BranchingVector(q=q, weights=(c,) * n)

    def _series(self, s: float) -> float:
        # sum_{n>=1} (1/2)^n Gamma(n+1+s) / (n-1)!; term ratio tends to 1/2
        total = 0.0
        log_half = math.log(0.5)
        for n in range(1, 400):
            term = math.exp(n * log_half + gammaln(n + 1.0 + s) - gammaln(n))
            total += term
            if n > 5 and term < 1e-16 * total:
                break
        return total

    def mellin(self, s):
        self._check_domain(s)
        return (
            (self.beta / 2.0) ** s
            * math.exp(gammaln(2.0 - s))
            * self._series(s)
        )

    def mellin_domain(self):
        return (-1.0, 2.0)

    def mean_offspring(self):
        return 2.0

    def q_moment(self, s):
        if s <= -2.0:
            return math.inf
        return math.exp(gammaln(2.0 + s)) / self.beta**s

    def q_min(self):
        return 0.0


@dataclass(frozen=True)
class SimplexGamma(Model):
    """Weights C_i = B * beta_i^(1/alpha) with B ~ Gamma(a, b), the count
    from ``n_law`` independent of B, and (beta_1..beta_N) flat Dirichlet on
    the simplex given the count, so that sum_i C_i^alpha = B^alpha.

    The exponent alpha is pinned by E[B^alpha] = 1 and is solved at
    construction.  The tilt replaces B by Gamma(a + alpha, b) and leaves the
    count and the simplex coordinates untouched.  ``q_mode`` is either
    ``"two_times_b"`` (Q = 2B, dependent) or ``"independent"`` with Q from
    ``q_law``.
    """

    a: float
    b: float
    n_law: OffspringLaw = UniformCount(1, 3)
    q_mode: str = "two_times_b"
    q_law: PerturbationLaw = DegenerateQ(1.0)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Gamma shape and rate must be > 0")
        if self.q_mode not in ("two_times_b", "independent"):
            raise ValueError(f"unknown q_mode {self.q_mode!r}")
        object.__setattr__(self, "_alpha_star", self._solve_b_exponent())

    @property
    def q_independent(self):  # type: ignore[override]
        return self.q_mode == "independent"

    def _log_b_moment(self, s: float) -> float:
        return gammaln(self.a + s) - gammaln(self.a) - s * math.log(self.b)

    def _solve_b_exponent(self) -> float:
        # positive root of E[B^s] = 1; requires the moment to dip below one
        f = self._log_b_moment
        if digamma(self.a) - math.log(self.b) >= 0:
            raise NoRootError(
                "E[B^s] is nondecreasing at 0; no positive root of "
                "E[B^alpha] = 1 exists"
            )
        hi = 1.0
        while f(hi) <= 0:
            hi *= 2.0
            if hi > 1e6:
                raise NoRootError("no positive root of E[B^alpha] = 1 found")
        lo = hi / 2.0
        while f(lo) >= 0 and lo > 1e-12:
            lo /= 2.0
        return float(brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16))

    def _vector_from_b(self, rng, b_val: float, tilted: bool) -> BranchingVector:
        n = self.n_law.sample(rng)
        if n == 1:
            betas = np.ones(1)
        else:
            e = rng.standard_exponential(n)
            betas = e / e.sum()
        ws = tuple((b_val * betas ** (1.0 / self._alpha_star)).tolist())
        if self.q_mode == "two_times_b":
            q = 2.0 * b_val
        else:
            q = self.q_law.sample(rng)
        return BranchingVector(q=q, weights=ws)

    def sample_p(self, rng):
        b_val = rng.gamma(self.a) / self.b
        return self._vector_from_b(rng, b_val, tilted=False)

    def sample_p_batch(self, rng, m):
        b_vals = rng.gamma(self.a, size=m) / self.b
        counts = self.n_law.sample_batch(rng, m)
        total = int(counts.sum())
        e = rng.standard_exponential(total)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        sums = np.add.reduceat(e, starts)
        betas = e / np.repeat(sums, counts)
        flat = np.repeat(b_vals, counts) * betas ** (1.0 / self._alpha_star)
        if self.q_mode == "two_times_b":
            qs = 2.0 * b_vals
        else:
            qs = self.q_law.sample_batch(rng, m)
        return counts, qs, flat

    def sample_p_given_n(self, n, rng):
        b_val = rng.gamma(self.a) / self.b
        if n == 1:
            betas = np.ones(1)
        else:
            e = rng.standard_exponential(n)
            betas = e / e.sum()
        ws = tuple((b_val * betas ** (1.0 / self._alpha_star)).tolist())
        q = 2.0 * b_val if self.q_mode == "two_times_b" else self.q_law.sample(rng)
        return q, ws

    def sample_tilted(self, ctx, rng):
        b_val = rng.gamma(self.a + ctx.alpha) / self.b
        return self._vector_from_b(rng, b_val, tilted=True)

    def sample_tilted_n(self, ctx, rng):
        # sum_i C_i^alpha = B^alpha is independent of N, so N is invariant
        return self.n_law.sample(rng)

    def _count_factor(self, p: float, deriv: bool = False) -> float:
        # E[N Gamma(1+p) Gamma(N) / Gamma(N+p)] and its derivative in p
        total = 0.0
        n = 1
        acc = 0.0
        while acc < 1.0 - 1e-14 and n <= 100_000:
            w = self.n_law.pmf(n)
            acc += w
            if w > 0.0:
                log_term = gammaln(1.0 + p) + gammaln(n) - gammaln(n + p)
                term = n * w * math.exp(log_term)
                if deriv:
                    term *= digamma(1.0 + p) - digamma(n + p)
                total += term
            n += 1
        return total

    def mellin(self, s):
        self._check_domain(s)
        p = s / self._alpha_star
        return math.exp(self._log_b_moment(s)) * self._count_factor(p)

    def mellin_deriv(self, s):
        self._check_domain(s)
        p = s / self._alpha_star
        b_mom = math.exp(self._log_b_moment(s))
        b_mom_d = b_mom * (digamma(self.a + s) - math.log(self.b))
        f = self._count_factor(p)
        f_d = self._count_factor(p, deriv=True) / self._alpha_star
        return b_mom_d * f + b_mom * f_d

    def mellin_domain(self):
        return (max(-self.a, -self._alpha_star), math.inf)

    def exact_alpha(self):
        return self._alpha_star

    def mean_offspring(self):
        return self.n_law.mean

    def q_moment(self, s):
        if self.q_mode == "two_times_b":
            if self.a + s <= 0:
                return math.inf
            return 2.0**s * math.exp(self._log_b_moment(s))
        return self.q_law.moment(s)

    def q_min(self):
        if self.q_mode == "two_times_b":
            return 0.0
        return self.q_law.min_value

    def q_degenerate(self):
        if self.q_mode == "two_times_b":
            return None
        return self.q_law.degenerate_value


@dataclass(frozen=True)
class DiscreteTable(Model):
    """Constant offspring count with finitely many (C_1..C_N, Q) outcomes.

    The tilt is an exact reweighting: outcome k keeps its weights and Q but
    its probability becomes p_k * sum_i c_{k,i}^alpha.
    """

    outcomes: tuple[tuple[tuple[float, ...], float], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        outcomes = tuple(
            (tuple(float(c) for c in ws), float(q)) for ws, q in self.outcomes
        )
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)
        if len(outcomes) != len(probs) or not outcomes:
            raise ValueError("need matching, nonempty outcomes and probs")
        if abs(sum(probs) - 1.0) > _PROB_TOL:
            raise ValueError("outcome probabilities must sum to 1")
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        n = len(outcomes[0][0])
        if any(len(ws) != n for ws, _ in outcomes):
            raise ValueError("all outcomes must share one offspring count")
        if any(c < 0 for ws, _ in outcomes for c in ws):
            raise ValueError("weights must be nonnegative")
        if any(q < 0 for _, q in outcomes):
            raise ValueError("Q must be nonnegative")
        object.__setattr__(self, "_cum", np.cumsum(probs))

    @property
    def n_offspring(self) -> int:
        return len(self.outcomes[0][0])

    @property
    def q_independent(self):  # type: ignore[override]
        qs = {q for _, q in self.outcomes}
        return len(qs) == 1

    def _pick(self, rng, cum) -> int:
        return int(np.searchsorted(cum, rng.random(), side="right"))

    def sample_p(self, rng):
        ws, q = self.outcomes[self._pick(rng, self._cum)]
        return BranchingVector(q=q, weights=ws)

    def sample_p_batch(self, rng, m):
        ks = np.searchsorted(self._cum, rng.random(m), side="right")
        n = self.n_offspring
        table = np.array([ws for ws, _ in self.outcomes])
        q_table = np.array([q for _, q in self.outcomes])
        counts = np.full(m, n, dtype=np.int64)
        return counts, q_table[ks], table[ks].ravel()

    def sample_p_given_n(self, n, rng):
        if n != self.n_offspring:
            raise ValueError("offspring count is constant")
        v = self.sample_p(rng)
        return v.q, v.weights

    def tilted_pmf(self, alpha: float) -> np.ndarray:
        """Exact outcome probabilities under the tilt (no sampling)."""
        mass = np.array(
            [sum(c**alpha for c in ws if c > 0) for ws, _ in self.outcomes]
        )
        return np.asarray(self.probs) * mass

    def make_context(self, alpha, mu):
        pmf = self.tilted_pmf(alpha)
        return TiltContext(
            alpha=alpha, mu=mu, params={"tilted_cum": np.cumsum(pmf)}
        )

    def sample_tilted(self, ctx, rng):
        ws, q = self.outcomes[self._pick(rng, ctx.params["tilted_cum"])]
        return BranchingVector(q=q, weights=ws)

    def sample_tilted_n(self, ctx, rng):
        return self.n_offspring

    def mellin(self, s):
        if s < 0:
            raise DomainError(
                f"s={s:.6g} outside the moment domain [0, inf) of a "
                "discrete table with possible zero weights"
            )
        # 0^s := 0 for s >= 0: zero weights never contribute
        return sum(
            p * sum(c**s for c in ws if c > 0)
            for p, (ws, _) in zip(self.probs, self.outcomes)
        )

    def mellin_deriv(self, s):
        # convention 0 * log 0 = 0: zero weights drop out of the sum
        return sum(
            p * sum(c**s * math.log(c) for c in ws if c > 0)
            for p, (ws, _) in zip(self.probs, self.outcomes)
        )

    def mellin_domain(self):
        return (0.0, math.inf)

    def mean_offspring(self):
        return float(self.n_offspring)

    def q_moment(self, s):
        return sum(p * q**s for p, (_, q) in zip(self.probs, self.outcomes))

    def q_min(self):
        return min(q for _, q in self.outcomes)

    def q_degenerate(self):
        qs = {q for _, q in self.outcomes}
        if len(qs) == 1:
            return qs.pop()
        return None


@dataclass(frozen=True)
class CustomModel(Model):
    """User-supplied sampler with optional tilt and moment hooks.

    Without a moment hook the solver falls back to a common-random-numbers
    Monte Carlo moment curve whose standard error is reported in the tilt
    context.  Without a tilt hook, tilted draws raise unless one of the
    generic tilt strategies applies.
    """

    sample_p_fn: Callable[[np.random.Generator], BranchingVector]
    sample_tilted_fn: (
        Callable[[TiltContext, np.random.Generator], BranchingVector] | None
    ) = None
    mellin_fn: Callable[[float], float] | None = None
    mellin_domain_hint: tuple[float, float] = (0.0, math.inf)
    q_indep: bool = False
    mc_mellin_samples: int = 200_000
    mc_mellin_seed: int = 0

    @property
    def q_independent(self):  # type: ignore[override]
        return self.q_indep

    def sample_p(self, rng):
        return self.sample_p_fn(rng)

    def sample_tilted(self, ctx, rng):
        if self.sample_tilted_fn is None:
            raise NoTiltAvailableError(
                "custom model has no tilted sampler hook"
            )
        return self.sample_tilted_fn(ctx, rng)

    def mellin(self, s):
        if self.mellin_fn is not None:
            self._check_domain(s)
            return self.mellin_fn(s)
        return self._mc_curve().value_at(s)

    def mellin_stderr(self, s: float) -> float | None:
        """Standard error of the Monte Carlo moment estimate, if used."""
        if self.mellin_fn is not None:
            return None
        return self._mc_curve().stderr_at(s)

    def mellin_domain(self):
        return self.mellin_domain_hint

    def _mc_curve(self) -> "_McMomentCurve":
        cached = getattr(self, "_mc_cache", None)
        if cached is None:
            rng = np.random.default_rng(
                np.random.SeedSequence(self.mc_mellin_seed)
            )
            counts, _, flat = Model.sample_p_batch(
                self, rng, self.mc_mellin_samples
            )
            cached = _McMomentCurve(counts, flat)
            object.__setattr__(self, "_mc_cache", cached)
        return cached


class _McMomentCurve:
    """Smooth-in-s Monte Carlo estimate of E[sum_i C_i^s] built once from a
    frozen sample (common random numbers), so root finding on it behaves."""

    def __init__(self, counts: np.ndarray, flat: np.ndarray):
        self._flat = flat
        self._starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    def _per_draw(self, s: float) -> np.ndarray:
        # 0.0**s == 0.0 for s > 0, so zero weights drop out on their own
        return np.add.reduceat(self._flat**s, self._starts)

    def value_at(self, s: float) -> float:
        return float(np.mean(self._per_draw(s)))

    def stderr_at(self, s: float) -> float:
        vals = self._per_draw(s)
        return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def _safe_exp(log_value: float) -> float:
    if log_value > 700.0:
        return math.inf
    return math.exp(log_value)


def mellin(model: Model, s: float) -> float:
    """E[sum_i C_i^s] for the model (analytic for built-ins)."""
    return model.mellin(s)


def drift_mu(
    model: Model,
    alpha: float,
    *,
    rng: np.random.Generator | None = None,
    n_mc: int = 200_000,
) -> float:
    """Spine drift mu = E[sum_i C_i^alpha log C_i].

    Uses the model's analytic moment derivative when available, otherwise a
    central finite difference of the analytic moment function, otherwise
    plain Monte Carlo (requires ``rng``).
    """
    d = model.mellin_deriv(alpha)
    if d is not None:
        return d
    try:
        lo, hi = model.mellin_domain()
        h = _FD_STEP * max(1.0, abs(alpha))
        h = min(h, 0.25 * (hi - alpha) if math.isfinite(hi) else h)
        h = min(h, 0.25 * (alpha - lo) if math.isfinite(lo) else h)
        return (model.mellin(alpha + h) - model.mellin(alpha - h)) / (2.0 * h)
    except NotImplementedError:
        pass
    if rng is None:
        rng = np.random.default_rng(0)
    total = 0.0
    for _ in range(n_mc):
        v = model.sample_p(rng)
        total += sum(c**alpha * math.log(c) for c in v.weights if c > 0)
    return total / n_mc


def _scan_grid(hi: float) -> list[float]:
    """Geometric grid (ratio 1.5) from 2^-6 up to just inside ``hi``.

    The moment function is convex, so mellin(s) - 1 has at most two sign
    changes and a ratio-1.5 grid cannot straddle a dip unnoticed unless the
    dip is razor thin, which the solver reports as NoRoot.
    """
    cap = min(hi - 1e-9, 512.0) if math.isfinite(hi) else 512.0
    pts = []
    s = 2.0**-6
    while s < cap:
        pts.append(s)
        s *= 1.5
    pts.append(cap)
    return pts


def solve_alpha(model: Model, *, tol: float = ROOT_TOL) -> TiltContext:
    """Find the tail exponent and build the tilt context.

    Locates every sign change of ``mellin(s) - 1`` on a geometric grid,
    refines each bracket, and keeps the root with positive drift.  Raises
    ``NoRootError`` when no sign change exists and ``NonPositiveDriftError``
    when roots exist but none has positive drift (the tilted walk would not
    cross high levels).
    """
    exact = model.exact_alpha()
    if exact is not None:
        alpha = exact
        if abs(model.mellin(alpha) - 1.0) > max(tol, 1e-8):
            raise NoRootError(
                f"model-reported exponent {alpha:.6g} does not satisfy "
                "the moment equation"
            )
        if not _dips_below_one(model, alpha):
            raise NoRootError(
                "moment function never falls below 1 left of the root"
            )
        mu = drift_mu(model, alpha)
        if mu <= 0:
            raise NonPositiveDriftError(alpha, mu)
        return model.make_context(alpha, mu)

    _, hi = model.mellin_domain()
    grid = _scan_grid(hi)
    values = []
    for s in grid:
        try:
            values.append(model.mellin(s) - 1.0)
        except (OverflowError, DomainError):
            values.append(math.inf)

    roots: list[float] = []
    for (s0, f0), (s1, f1) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if f0 == 0.0:
            roots.append(s0)
            continue
        if math.isinf(f0) or math.isinf(f1):
            continue
        if f0 * f1 < 0:
            roots.append(
                float(
                    brentq(
                        lambda s: model.mellin(s) - 1.0,
                        s0,
                        s1,
                        xtol=1e-14,
                        rtol=8.9e-16,
                    )
                )
            )
    if values and values[-1] == 0.0:
        roots.append(grid[-1])

    roots = [r for r in roots if abs(model.mellin(r) - 1.0) <= tol]
    if not roots:
        raise NoRootError(
            "mellin(s) - 1 has no sign change on the searchable domain"
        )

    best: tuple[float, float] | None = None
    for r in sorted(roots):
        mu = drift_mu(model, r)
        if mu > 0:
            best = (r, mu)
    if best is None:
        r = max(roots)
        raise NonPositiveDriftError(r, drift_mu(model, r))

    alpha, mu = best
    if not _dips_below_one(model, alpha):
        raise NoRootError(
            "moment function never falls below 1 left of the root"
        )
    return model.make_context(alpha, mu)


def _dips_below_one(model: Model, alpha: float) -> bool:
    # Existence of some beta < alpha with mellin(beta) < 1
    for frac in (0.5, 0.75, 0.9, 0.25, 0.99):
        try:
            if model.mellin(frac * alpha) < 1.0:
                return True
        except (DomainError, OverflowError):
            continue
    return False


def sample_p(model: Model, rng: np.random.Generator) -> BranchingVector:
    """One branching vector under the original measure."""
    return model.sample_p(rng)


def sample_tilted(
    model: Model, ctx: TiltContext, rng: np.random.Generator
) -> BranchingVector:
    """One branching vector from the spine law (density D against P)."""
    return model.sample_tilted(ctx, rng)


def choose_spine_child(
    v: BranchingVector, alpha: float, rng: np.random.Generator
) -> int:
    """Pick child j (1-based) with probability C_j^alpha / sum_i C_i^alpha."""
    ws = v.weights
    if len(ws) == 1:
        if ws[0] <= 0.0:
            raise ZeroSpineWeightError("the only child weight is zero")
        return 1
    masses = [c**alpha for c in ws]
    total = math.fsum(masses)
    if total <= 0.0:
        raise ZeroSpineWeightError("sum of child weight masses is zero")
    if math.isinf(total):
        # an overflowed mass dominates; the limit law picks the largest weight
        return max(range(len(ws)), key=lambda k: ws[k]) + 1
    u = rng.random() * total
    acc = 0.0
    for j, mass in enumerate(masses, start=1):
        acc += mass
        if u < acc:
            return j
    return len(ws)


# ---------------------------------------------------------------------------
# generic tilt strategies
# ---------------------------------------------------------------------------


def tilt_mixture_sample(
    model: Model, ctx: TiltContext, rng: np.random.Generator
) -> BranchingVector:
    """Tilted draw via the mixture decomposition: draw the tilted count,
    pick one coordinate, draw it from its tilted marginal, and fill the rest
    conditionally under the original measure."""
    ing = model.mixture_ingredients(ctx)
    if ing is None:
        raise MissingIngredientsError(
            f"{type(model).__name__} provides no mixture ingredients"
        )
    n = ing.sample_n_tilted(rng)
    i = int(rng.integers(n))
    c = ing.sample_coord_tilted(rng)
    return ing.fill_given_coord(rng, n, i, c)


def tilt_ar_bounded_sample(
    model: Model,
    ctx: TiltContext,
    bounds: Sequence[float],
    rng: np.random.Generator,
    max_tries: int = 1_000_000,
) -> tuple[BranchingVector, int]:
    """Tilted draw by acceptance-rejection when each C_i <= bounds[i] a.s.

    Returns the accepted vector and the number of attempts (the acceptance
    rate diagnostic).  Raises NonBoundedModelError if a draw violates its
    bound, which invalidates the premise.
    """
    alpha = ctx.alpha
    n = model.sample_tilted_n(ctx, rng)
    if len(bounds) < n:
        raise NonBoundedModelError(
            f"drew count {n} but only {len(bounds)} bounds were supplied"
        )
    denom = math.fsum(b**alpha for b in bounds[:n])
    for attempt in range(1, max_tries + 1):
        q, ws = model.sample_p_given_n(n, rng)
        for c, b in zip(ws, bounds):
            if c > b * (1.0 + 1e-12):
                raise NonBoundedModelError(
                    f"weight {c:.6g} exceeds its bound {b:.6g}"
                )
        mass = math.fsum(c**alpha for c in ws)
        if rng.random() <= mass / denom:
            return BranchingVector(q=q, weights=tuple(ws)), attempt
    raise MissingIngredientsError(
        f"no acceptance in {max_tries} tries; bounds are far too loose"
    )


def tilt_ar_sumbound_sample(
    model: Model,
    ctx: TiltContext,
    b: float,
    a: float,
    rng: np.random.Generator,
    max_tries: int = 1_000_000,
) -> tuple[BranchingVector, int]:
    """Tilted draw by acceptance-rejection when D = sum_i C_i^alpha <= b a.s.

    For each attempt draws an independent Pareto(a, 1) variate Z and accepts
    when Z > (b / D)^(1/a); given the count the acceptance probability is
    E[D | count] / b.  Returns the accepted vector and the attempt count.
    """
    if a <= 0 or b <= 0:
        raise ValueError("need a > 0 and b > 0")
    alpha = ctx.alpha
    n = model.sample_tilted_n(ctx, rng)
    for attempt in range(1, max_tries + 1):
        q, ws = model.sample_p_given_n(n, rng)
        d = math.fsum(c**alpha for c in ws)
        if d > b * (1.0 + 1e-12):
            raise SumBoundViolatedError(
                f"observed D={d:.6g} above the promised bound {b:.6g}"
            )
        z = (1.0 - rng.random()) ** (-1.0 / a)
        if d > 0.0 and z > (b / d) ** (1.0 / a):
            return BranchingVector(q=q, weights=tuple(ws)), attempt
    raise MissingIngredientsError(
        f"no acceptance in {max_tries} tries; bound {b} is far too loose"
    )


def inverse_mass_identity(
    model: Model,
    ctx: TiltContext,
    n: int,
    rng: np.random.Generator,
    cap: float = 10.0,
) -> tuple[float, float]:
    """Unbiased estimate (with standard error) of the tilted mean of 1/D,
    which equals one exactly when the tilted sampler has density D against
    the original law.

    The reciprocal mass under the tilt can have a tail index barely above
    one (tilted weight families whose member can sit near zero), where the
    plain average of 1/D converges uselessly slowly and its sample standard
    error is meaningless.  Splitting at ``cap`` restores a valid CLT:

        E~[1/D] = E~[min(1/D, cap)] + E_P[(1 - cap * D)^+],

    because E~[(1/D - cap)^+] = E_P[D (1/D - cap)^+] = E_P[(1 - cap D)^+].
    Both averaged terms are bounded (by cap and by one), and a wrong tilted
    sampler still shows up through the first term.
    """
    if cap <= 0:
        raise ValueError("cap must be > 0")
    alpha = ctx.alpha
    head = np.empty(n)
    tail = np.empty(n)
    for i in range(n):
        d = model.sample_tilted(ctx, rng).spine_mass(alpha)
        head[i] = cap if d <= 0 else min(1.0 / d, cap)
        d_p = model.sample_p(rng).spine_mass(alpha)
        tail[i] = max(1.0 - cap * d_p, 0.0)
    m1, se1 = float(head.mean()), float(head.std(ddof=1) / math.sqrt(n))
    m2, se2 = float(tail.mean()), float(tail.std(ddof=1) / math.sqrt(n))
    return m1 + m2, math.hypot(se1, se2)


# ---------------------------------------------------------------------------
# estimator-quality advisory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyReport:
    """Advisory moments behind the bounded-relative-error condition."""

    e_q_alpha: float
    e_q_2alpha_over_d: float
    finite: bool
    method: str
    warnings: tuple[str, ...] = ()


def q_efficiency_check(
    model: Model,
    ctx: TiltContext,
    *,
    rng: np.random.Generator | None = None,
    n_mc: int = 100_000,
) -> EfficiencyReport:
    """Estimate E[Q^alpha] and the second-moment control behind bounded
    relative error.  For Q independent of the weights the control is
    E[Q^(2 alpha)]; otherwise it is E[Q^(2 alpha) / D].  Analytic where the
    model allows, Monte Carlo with a heavy-tail heuristic otherwise.
    Advisory only: never gates an estimate.
    """
    alpha = ctx.alpha
    warnings: list[str] = []

    e_q_alpha = model.q_moment(alpha)
    if e_q_alpha is None:
        e_q_alpha, w = _mc_q_moment(model, alpha, rng, n_mc)
        warnings.extend(w)

    if model.q_independent:
        second = model.q_moment(2.0 * alpha)
        if second is not None:
            return EfficiencyReport(
                e_q_alpha=e_q_alpha,
                e_q_2alpha_over_d=second,
                finite=math.isfinite(second),
                method="analytic, independent Q: control is E[Q^(2 alpha)]",
                warnings=tuple(warnings),
            )

    if isinstance(model, SimplexGamma) and model.q_mode == "two_times_b":
        # Q = 2B and D = B^alpha give E[Q^(2a) / D] = 4^alpha E[B^alpha]
        val = 4.0**alpha
        return EfficiencyReport(
            e_q_alpha=e_q_alpha,
            e_q_2alpha_over_d=val,
            finite=True,
            method="analytic: Q=2B collapses the ratio to 4^alpha",
            warnings=tuple(warnings),
        )

    if isinstance(model, DiscreteTable):
        val = sum(
            p * q ** (2.0 * alpha) / sum(c**alpha for c in ws if c > 0)
            for p, (ws, q) in zip(model.probs, model.outcomes)
        )
        return EfficiencyReport(
            e_q_alpha=e_q_alpha,
            e_q_2alpha_over_d=val,
            finite=math.isfinite(val),
            method="exact finite sum",
            warnings=tuple(warnings),
        )

    if rng is None:
        rng = np.random.default_rng(0)
    vals = np.empty(n_mc)
    for i in range(n_mc):
        v = model.sample_p(rng)
        d = v.spine_mass(alpha)
        vals[i] = math.inf if d <= 0 else v.q ** (2.0 * alpha) / d
    est = float(np.mean(vals))
    finite = math.isfinite(est)
    top = float(np.max(vals))
    if finite and top > 0.05 * vals.sum():
        warnings.append(
            "single draw carries >5% of the Monte Carlo mass; the moment "
            "may be heavy-tailed or infinite"
        )
        if top > 0.2 * vals.sum():
            finite = False
    return EfficiencyReport(
        e_q_alpha=e_q_alpha,
        e_q_2alpha_over_d=est,
        finite=finite,
        method=f"Monte Carlo (n={n_mc})",
        warnings=tuple(warnings),
    )


def _mc_q_moment(model, s, rng, n_mc):
    if rng is None:
        rng = np.random.default_rng(0)
    vals = np.empty(n_mc)
    for i in range(n_mc):
        vals[i] = model.sample_p(rng).q ** s
    warnings = []
    if float(np.max(vals)) > 0.05 * float(vals.sum()):
        warnings.append("E[Q^alpha] Monte Carlo estimate looks heavy-tailed")
    return float(np.mean(vals)), warnings
