"""Independent estimators of the same quantities by different routes.

These exist to cross-validate the importance sampler: a naive depth-truncated
tree Monte Carlo of the maximum W, a population-dynamics pool approximating
the law of W, and two estimators of the tail constant H in
``P(W > t) ~ H exp(-alpha t)`` (the fixed-point form and the spine form).
None of them share code paths with the sampler beyond the model laws.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BudgetExceededError,
    DomainError,
    NotDegenerateQError,
    RecursionBudgetError,
)
from .models import Model, TiltContext, choose_spine_child
from .replication import EstimateSummary, SeedSpec, summarize_values
from .sampler import EstimatorVariant, is_estimate

DEFAULT_NODE_CAP = 5_000_000
POOL_SE_BATCHES = 20


@dataclass(frozen=True)
class WPool:
    """Dependent samples approximating i.i.d. copies of W = log of the
    endogenous maximum; -inf entries are mass at zero on the original scale.
    ``iterations`` doubles as the effective truncation depth."""

    samples: np.ndarray
    pool_size: int
    iterations: int


def _expected_tree_size(model: Model, depth: int) -> float | None:
    mean_n = model.mean_offspring()
    if mean_n is None:
        return None
    total = 0.0
    power = 1.0
    for _ in range(depth + 1):
        total += power
        power *= mean_n
        if total > 1e18:
            return math.inf
    return total


def _check_recursion_budget(model: Model, depth: int, node_cap: int) -> None:
    expected = _expected_tree_size(model, depth)
    if expected is not None and expected > node_cap:
        raise RecursionBudgetError(
            f"expected truncated tree size {expected:.3g} exceeds the cap "
            f"{node_cap}; lower the depth or raise the cap"
        )


def _log_q(qs: np.ndarray) -> np.ndarray:
    out = np.full(qs.shape, -np.inf)
    pos = qs > 0
    out[pos] = np.log(qs[pos])
    return out


def naive_w_sample(
    model: Model,
    depth: int,
    rng: np.random.Generator,
    node_cap: int = DEFAULT_NODE_CAP,
) -> float:
    """One sample of the maximum over the depth-truncated tree.

    Depth 0 keeps only the root, so the sample is just log Q of the root.
    The truncated maximum increases to W as depth grows, so tail estimates
    built from it are biased low by the truncated mass.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    _check_recursion_budget(model, depth, node_cap)
    best = -math.inf
    frontier = [0.0]
    nodes = 0
    for g in range(depth + 1):
        children: list[float] = []
        expand = g < depth
        for s in frontier:
            v = model.sample_p(rng)
            nodes += 1
            if nodes > node_cap:
                raise RecursionBudgetError(
                    f"visited more than {node_cap} nodes at depth {g}"
                )
            y = math.log(v.q) if v.q > 0 else -math.inf
            if s + y > best:
                best = s + y
            if expand:
                for c in v.weights:
                    if c > 0.0:
                        children.append(s + math.log(c))
        frontier = children
        if not frontier:
            break
    return best


def _naive_w_batch(
    model: Model, depth: int, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized across samples: one generation of every sample at a time."""
    best = np.full(n_samples, -np.inf)
    owner = np.arange(n_samples)  # sample id per frontier node, kept sorted
    s_vals = np.zeros(n_samples)
    for g in range(depth + 1):
        m = len(s_vals)
        if m == 0:
            break
        counts, qs, flat = model.sample_p_batch(rng, m)
        node_vals = s_vals + _log_q(qs)
        # per-sample max over this generation; owners are sorted
        starts = np.concatenate(([0], np.flatnonzero(np.diff(owner)) + 1))
        seg_max = np.maximum.reduceat(node_vals, starts)
        ids = owner[starts]
        best[ids] = np.maximum(best[ids], seg_max)
        if g == depth:
            break
        child_s = np.repeat(s_vals, counts)
        child_owner = np.repeat(owner, counts)
        keep = flat > 0
        s_vals = child_s[keep] + np.log(flat[keep])
        owner = child_owner[keep]
    return best


def naive_tail(
    model: Model,
    t: float,
    n: int,
    depth: int,
    rng: np.random.Generator,
    node_cap: int = DEFAULT_NODE_CAP,
) -> EstimateSummary:
    """Fraction of truncated-tree samples exceeding t, with binomial error.

    A lower-bound-biased estimator at finite depth; see
    ``naive_truncation_bound`` for how much mass the truncation can remove.
    """
    _check_recursion_budget(model, depth, node_cap)
    expected = _expected_tree_size(model, depth) or float(depth + 1)
    block = max(1, min(n, int(node_cap / max(expected, 1.0))))
    started = time.perf_counter()
    hits = 0
    done = 0
    while done < n:
        k = min(block, n - done)
        best = _naive_w_batch(model, depth, k, rng)
        hits += int(np.count_nonzero(best > t))
        done += k
    phat = hits / n
    std_err = math.sqrt(phat * (1.0 - phat) / n)
    return EstimateSummary(
        n=n,
        mean=phat,
        std_err=std_err,
        rel_err=std_err / phat if phat > 0 else None,
        prop_nonzero=phat,
        mean_terminal_gen=math.nan,
        mean_tau=math.nan,
        mean_time_s=(time.perf_counter() - started) / n,
        discarded=0,
    )


def naive_truncation_bound(model: Model, t: float, depth: int) -> float:
    """Upper bound on the tail mass the depth truncation removes.

    Chernoff bound over the generations beyond ``depth``: for any exponent
    beta with moment value below one,
    ``E[Q^beta] e^(-beta t) sum_{g > depth} mellin(beta)^g``.
    Returns inf when no usable exponent is found.
    """
    best = math.inf
    s = 2.0**-6
    _, hi = model.mellin_domain()
    cap = min(hi - 1e-9, 512.0) if math.isfinite(hi) else 512.0
    while s < cap:
        try:
            rho = model.mellin(s)
        except (DomainError, OverflowError):
            break
        if rho < 1.0:
            q_mom = model.q_moment(s)
            if q_mom is not None and math.isfinite(q_mom):
                bound = (
                    q_mom
                    * math.exp(-s * t)
                    * rho ** (depth + 1)
                    / (1.0 - rho)
                )
                best = min(best, bound)
        s *= 1.25
    return best


def popdyn_pool(
    model: Model,
    pool_size: int,
    iterations: int,
    rng: np.random.Generator,
) -> WPool:
    """Population-dynamics pool for the law of W.

    Start from a pool of -inf (zero terminal values); each iteration rebuilds
    every entry as ``max(log Q, max_i (log C_i + W_pi(i)))`` with a fresh
    branching vector and uniformly resampled indices into the previous pool.
    Entries are coupled through the resampling, so they are dependent but
    their empirical law converges to that of W.
    """
    if pool_size < 1 or iterations < 1:
        raise ValueError("pool_size and iterations must be >= 1")
    pool = np.full(pool_size, -np.inf)
    for _ in range(iterations):
        counts, qs, flat = model.sample_p_batch(rng, pool_size)
        total = int(counts.sum())
        idx = rng.integers(0, pool_size, size=total)
        vals = np.full(total, -np.inf)
        keep = flat > 0
        vals[keep] = np.log(flat[keep]) + pool[idx[keep]]
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        seg_max = np.maximum.reduceat(vals, starts)
        pool = np.maximum(_log_q(qs), seg_max)
    return WPool(samples=pool, pool_size=pool_size, iterations=iterations)


def pool_tail(pool: WPool, t: float) -> tuple[float, float]:
    """Tail estimate P(W > t) from the pool, with a batch-means standard
    error (20 batches) that respects the in-pool dependence."""
    samples = pool.samples
    phat = float(np.mean(samples > t))
    k = min(POOL_SE_BATCHES, len(samples))
    batches = np.array_split(samples, k)
    fracs = np.array([np.mean(b > t) for b in batches])
    se = float(np.std(fracs, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return phat, se


def save_pool(pool: WPool, path: str | Path) -> None:
    """One sample per line; ``-inf`` is written literally."""
    with open(path, "w") as fh:
        for x in pool.samples:
            fh.write(repr(float(x)) + "\n")


def load_pool(path: str | Path, iterations: int = 0) -> WPool:
    """Read a pool written by ``save_pool`` (or any one-float-per-line file;
    the ``-inf`` literal is accepted)."""
    with open(path) as fh:
        samples = np.array([float(line) for line in fh if line.strip()])
    return WPool(samples=samples, pool_size=len(samples), iterations=iterations)


def estimate_H_equiv(
    model: Model,
    ctx: TiltContext,
    pool: WPool,
    n: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Tail constant from the fixed-point identity:

        H = E[ e^(alpha Y) v max_i e^(alpha (X_i + W_i))
               - sum_i e^(alpha (X_i + W_i)) ] / (alpha mu),

    with the W_i resampled from the pool.  The reported standard error is
    conditional on the pool."""
    alpha, mu = ctx.alpha, ctx.mu
    counts, qs, flat = model.sample_p_batch(rng, n)
    total = int(counts.sum())
    w = pool.samples[rng.integers(0, pool.pool_size, size=total)]
    terms = np.zeros(total)
    keep = flat > 0
    finite_w = w > -np.inf
    live = keep & finite_w
    terms[live] = np.exp(alpha * (np.log(flat[live]) + w[live]))
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    seg_sum = np.add.reduceat(terms, starts)
    seg_max = np.maximum.reduceat(terms, starts)
    a_term = np.zeros(n)
    qpos = qs > 0
    a_term[qpos] = qs[qpos] ** alpha
    integrand = np.maximum(a_term, seg_max) - seg_sum
    vals = integrand / (alpha * mu)
    return summarize_values(vals)


def estimate_H_spine(
    model: Model,
    ctx: TiltContext,
    m: int,
    n: int,
    rng: np.random.Generator,
    node_budget: int = DEFAULT_NODE_CAP,
) -> tuple[float, float]:
    """Tail constant from the spine form at horizon m:

        H_m = E~[ (e^(alpha xi_m) - e^(alpha (M - V_m)))^+ / D_m ] / (alpha mu),

    where M is the running maximum of S_i + Y_i over every node strictly
    before the spine node of generation m, V_m is the spine walk there, and
    D_m its weight mass.  H_m converges to H as the horizon grows.

    When Q is independent of the count and weights, D_m is independent of
    everything else in the functional and its tilted mean is exactly one, so
    the factor is integrated out rather than sampled; 1/D_m is the dominant
    variance (often the only infinite-variance) term, and replacing it by its
    conditional expectation leaves the mean untouched."""
    if m < 1:
        raise ValueError("horizon m must be >= 1")
    expected = _expected_tree_size(model, m)
    if expected is not None and expected > node_budget:
        raise BudgetExceededError(int(expected), node_budget)
    divide_mass = not model.q_independent
    vals = np.empty(n)
    for i in range(n):
        vals[i] = _h_spine_once(model, ctx, m, rng, node_budget, divide_mass)
    vals /= ctx.alpha * ctx.mu
    return summarize_values(vals)


def _h_spine_once(
    model: Model,
    ctx: TiltContext,
    m: int,
    rng: np.random.Generator,
    node_budget: int,
    divide_mass: bool = True,
) -> float:
    alpha = ctx.alpha
    nodes = 0
    best = -math.inf  # max of S_i + Y_i over nodes strictly before gen-m spine

    # generation frontier as parallel lists: (log-weight, on-spine flag),
    # children appended in order so lexicographic order is positional
    frontier: list[tuple[float, bool]] = [(0.0, True)]
    for g in range(m):
        children: list[tuple[float, bool]] = []
        for s, on_spine in frontier:
            if on_spine:
                vec = model.sample_tilted(ctx, rng)
                spine_child = choose_spine_child(vec, alpha, rng)
            else:
                vec = model.sample_p(rng)
                spine_child = 0
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceededError(nodes, node_budget)
            y = math.log(vec.q) if vec.q > 0 else -math.inf
            if s + y > best:
                best = s + y
            for j, c in enumerate(vec.weights, start=1):
                if c > 0.0:
                    children.append((s + math.log(c), j == spine_child))
        frontier = children

    # generation m: only nodes lexicographically before the spine node enter
    # the max; the spine node itself supplies xi_m and the weight mass
    for s, on_spine in frontier:
        if on_spine:
            vec = model.sample_tilted(ctx, rng)
            xi_m = math.log(vec.q) if vec.q > 0 else -math.inf
            bracket = math.exp(alpha * xi_m) - math.exp(alpha * (best - s))
            value = max(bracket, 0.0)
            if divide_mass:
                value /= vec.spine_mass(alpha)
            return value
        vec = model.sample_p(rng)
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceededError(nodes, node_budget)
        y = math.log(vec.q) if vec.q > 0 else -math.inf
        if s + y > best:
            best = s + y
    raise AssertionError("spine node missing from its generation")


@dataclass(frozen=True)
class CLBoundRow:
    t: float
    estimate: float
    std_err: float
    bound: float
    passed: bool


def cl_bound_check(
    model: Model,
    ctx: TiltContext,
    t_grid: list[float],
    n: int,
    seeds: SeedSpec,
    parallelism: int = 1,
) -> list[CLBoundRow]:
    """For constant perturbation Q == q, the tail obeys
    ``P(W > t) <= q^alpha e^(-alpha t)``; check the sampler against it."""
    q = model.q_degenerate()
    if q is None:
        raise NotDegenerateQError(
            "the exponential tail bound needs a constant perturbation"
        )
    variant = (
        EstimatorVariant.INDEPENDENT_Q
        if model.q_independent
        else EstimatorVariant.GENERAL
    )
    rows = []
    for k, t in enumerate(t_grid):
        summary = is_estimate(
            model,
            ctx,
            t,
            n,
            seeds.child(seeds.stream_id + k),
            variant=variant,
            parallelism=parallelism,
        )
        bound = q**ctx.alpha * math.exp(-ctx.alpha * t)
        rows.append(
            CLBoundRow(
                t=t,
                estimate=summary.mean,
                std_err=summary.std_err,
                bound=bound,
                passed=summary.mean <= bound + 4.0 * summary.std_err,
            )
        )
    return rows
