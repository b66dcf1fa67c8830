"""Offspring-count and perturbation laws shared by the built-in models.

Offspring laws know their pmf, mean, and how to draw from their size-biased
version ``P(N~ = n) = n P(N = n) / E[N]``, which is the offspring law on the
spine whenever the weights are i.i.d. and independent of the count.
Perturbation laws know their power moments ``E[Q^s]`` where available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# pmf tables are truncated once the accumulated mass is this close to one
_PMF_TAIL = 1e-15
_PMF_CAP = 100_000


class OffspringLaw:
    """Distribution of the offspring count N on {1, 2, ...}."""

    def sample(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return np.array([self.sample(rng) for _ in range(m)], dtype=np.int64)

    def pmf(self, n: int) -> float:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def size_biased_pmf(self, n: int) -> float:
        return n * self.pmf(n) / self.mean

    def sample_size_biased(self, rng: np.random.Generator) -> int:
        # generic inversion from a truncated size-biased pmf table
        cum = self._size_biased_cumulative()
        u = rng.random()
        return int(np.searchsorted(cum, u, side="right")) + 1

    def _size_biased_cumulative(self) -> np.ndarray:
        cached = getattr(self, "_sb_cum", None)
        if cached is not None:
            return cached
        probs = []
        acc = 0.0
        n = 1
        while acc < 1.0 - _PMF_TAIL and n <= _PMF_CAP:
            p = self.size_biased_pmf(n)
            probs.append(p)
            acc += p
            n += 1
        cum = np.cumsum(probs)
        cum[-1] = max(cum[-1], 1.0)  # absorb truncated tail
        object.__setattr__(self, "_sb_cum", cum)
        return cum


@dataclass(frozen=True)
class FixedCount(OffspringLaw):
    """N identically equal to ``value``."""

    value: int

    def __post_init__(self):
        if self.value < 1:
            raise ValueError("offspring count must be >= 1")

    def sample(self, rng):
        return self.value

    def sample_batch(self, rng, m):
        return np.full(m, self.value, dtype=np.int64)

    def pmf(self, n):
        return 1.0 if n == self.value else 0.0

    @property
    def mean(self):
        return float(self.value)

    def sample_size_biased(self, rng):
        return self.value


@dataclass(frozen=True)
class TruncatedPoisson(OffspringLaw):
    """N = K | K > 0 with K ~ Poisson(param); mean param / (1 - e^-param).

    Its size-biased version is exactly Poisson(param) + 1.
    """

    param: float

    def __post_init__(self):
        if self.param <= 0:
            raise ValueError("Poisson parameter must be > 0")

    def sample(self, rng):
        while True:
            k = int(rng.poisson(self.param))
            if k > 0:
                return k

    def sample_batch(self, rng, m):
        out = rng.poisson(self.param, size=m)
        bad = out == 0
        while bad.any():
            out[bad] = rng.poisson(self.param, size=int(bad.sum()))
            bad = out == 0
        return out.astype(np.int64)

    def pmf(self, n):
        if n < 1:
            return 0.0
        log_p = -self.param + n * math.log(self.param) - math.lgamma(n + 1)
        return math.exp(log_p) / (1.0 - math.exp(-self.param))

    @property
    def mean(self):
        return self.param / (1.0 - math.exp(-self.param))

    def sample_size_biased(self, rng):
        return int(rng.poisson(self.param)) + 1


@dataclass(frozen=True)
class GeometricCount(OffspringLaw):
    """N on {1, 2, ...} with P(N = n) = p (1-p)^(n-1); mean 1/p.

    Size-biased version is NegativeBinomial(2, p) + 1 (failures counted).
    """

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("geometric parameter must lie in (0, 1)")

    def sample(self, rng):
        return int(rng.geometric(self.p))

    def sample_batch(self, rng, m):
        return rng.geometric(self.p, size=m).astype(np.int64)

    def pmf(self, n):
        if n < 1:
            return 0.0
        return self.p * (1.0 - self.p) ** (n - 1)

    @property
    def mean(self):
        return 1.0 / self.p

    def sample_size_biased(self, rng):
        return int(rng.negative_binomial(2, self.p)) + 1


@dataclass(frozen=True)
class UniformCount(OffspringLaw):
    """N uniform on the integers {lo, ..., hi}."""

    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise ValueError("need 1 <= lo <= hi")

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def sample_batch(self, rng, m):
        return rng.integers(self.lo, self.hi + 1, size=m).astype(np.int64)

    def pmf(self, n):
        if self.lo <= n <= self.hi:
            return 1.0 / (self.hi - self.lo + 1)
        return 0.0

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)


class PerturbationLaw:
    """Distribution of the nonnegative perturbation factor Q."""

    def sample(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return np.array([self.sample(rng) for _ in range(m)])

    def moment(self, s: float) -> float:
        """E[Q^s]; returns ``inf`` where the moment diverges."""
        raise NotImplementedError

    @property
    def min_value(self) -> float:
        """Essential infimum of Q."""
        raise NotImplementedError

    @property
    def degenerate_value(self) -> float | None:
        """The constant q when Q == q a.s., else None."""
        return None


@dataclass(frozen=True)
class DegenerateQ(PerturbationLaw):
    """Q identically equal to ``value`` (>= 0)."""

    value: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("Q must be nonnegative")

    def sample(self, rng):
        return self.value

    def sample_batch(self, rng, m):
        return np.full(m, self.value)

    def moment(self, s):
        return self.value**s

    @property
    def min_value(self):
        return self.value

    @property
    def degenerate_value(self):
        return self.value


@dataclass(frozen=True)
class ParetoQ(PerturbationLaw):
    """Q = scale * e^Y with Y ~ Exponential(shape), i.e. Pareto(shape, scale).

    E[Q^s] = shape * scale^s / (shape - s) for s < shape, infinite otherwise.
    """

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("Pareto shape and scale must be > 0")

    def sample(self, rng):
        return self.scale * math.exp(rng.standard_exponential() / self.shape)

    def sample_batch(self, rng, m):
        return self.scale * np.exp(rng.standard_exponential(m) / self.shape)

    def moment(self, s):
        if s >= self.shape:
            return math.inf
        return self.shape * self.scale**s / (self.shape - s)

    @property
    def min_value(self):
        return self.scale
