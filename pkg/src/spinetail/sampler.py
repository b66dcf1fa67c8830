"""Spine importance sampler for tail probabilities of the tree maximum.

One replication grows the weighted branching tree under the tilted measure:
a distinguished root-to-depth path (the spine) draws its branching vectors
from the tilted law and extends child-by-child with probability proportional
to the child weight raised to the tail exponent; every other node draws from
the original law.  Nodes are visited in length-lexicographic order until the
first node with ``S_i + Y_i > t``.  If that node is the spine node of its
generation the replication returns ``exp(-alpha * S_i)`` times (in the
general variant) the reciprocal of that node's weight mass; otherwise it
returns zero.  The average over replications is unbiased for P(W > t).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, ZeroSpineWeightError
from .models import (
    BranchingVector,
    Model,
    TiltContext,
    choose_spine_child,
)
from .replication import (
    EstimateSummary,
    SeedSpec,
    aggregate,
    run_replications,
)
from .tree import Frontier, NodeIndex, NodeState, ROOT, child

DEFAULT_NODE_BUDGET = 1_000_000


class EstimatorVariant(enum.Enum):
    """General form divides by the terminal spine node's weight mass; the
    independent-Q form drops that factor (valid only when Q is independent
    of the count and weights, where it is pure extra variance)."""

    GENERAL = "general"
    INDEPENDENT_Q = "independent_q"


@dataclass(frozen=True, slots=True)
class ISRun:
    """One importance-sampling replication."""

    z_value: float
    tau: int
    terminal_index: NodeIndex
    hit_on_spine: bool
    v_tau: float
    nodes_expanded: int
    elapsed: float


def _log_or_neg_inf(q: float) -> float:
    return math.log(q) if q > 0.0 else -math.inf


def run_single(
    model: Model,
    ctx: TiltContext,
    t: float,
    rng: np.random.Generator,
    variant: EstimatorVariant = EstimatorVariant.GENERAL,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> ISRun:
    """Simulate one copy of the estimator Z(t).

    Every visited node's branching vector is drawn before the crossing test
    runs on that node, so the weight mass at the terminal node is always in
    hand.  Raises BudgetExceededError when the tree grows past
    ``node_budget`` nodes before any node crosses ``t``.
    """
    if node_budget < 1:
        raise ValueError("node budget must be >= 1")
    if variant is EstimatorVariant.INDEPENDENT_Q and not model.q_independent:
        raise ValueError(
            "the independent-Q estimator requires Q independent of the "
            "count and weights; use the general variant"
        )
    started = time.perf_counter()
    alpha = ctx.alpha

    # root vector is on the spine: tilted draw, then pick the spine child
    vec = model.sample_tilted(ctx, rng)
    nodes_expanded = 1
    spine_next = choose_spine_child(vec, alpha, rng)

    cur_index: NodeIndex = ROOT
    cur_s = 0.0
    cur_y = _log_or_neg_inf(vec.q)
    cur_on_spine = True
    cur_vec: BranchingVector = vec

    frontier = Frontier()
    _push_children(frontier, cur_index, cur_s, vec, spine_next)

    while cur_s + cur_y <= t:
        state = frontier.advance()
        if nodes_expanded >= node_budget:
            raise BudgetExceededError(nodes_expanded, node_budget)
        if state.on_spine:
            vec = model.sample_tilted(ctx, rng)
            spine_next = choose_spine_child(vec, alpha, rng)
        else:
            vec = model.sample_p(rng)
            spine_next = 0
        nodes_expanded += 1
        _push_children(frontier, state.index, state.log_weight, vec, spine_next)
        cur_index = state.index
        cur_s = state.log_weight
        cur_y = _log_or_neg_inf(vec.q)
        cur_on_spine = state.on_spine
        cur_vec = vec

    if cur_on_spine:
        mass = cur_vec.spine_mass(alpha)
        if mass <= 0.0:
            raise ZeroSpineWeightError(
                "terminal spine node has zero weight mass"
            )
        z = math.exp(-alpha * cur_s)
        if variant is EstimatorVariant.GENERAL:
            z /= mass
        v_tau = cur_s
    else:
        z = 0.0
        v_tau = math.nan

    return ISRun(
        z_value=z,
        tau=len(cur_index),
        terminal_index=cur_index,
        hit_on_spine=cur_on_spine,
        v_tau=v_tau,
        nodes_expanded=nodes_expanded,
        elapsed=time.perf_counter() - started,
    )


def _push_children(
    frontier: Frontier,
    index: NodeIndex,
    log_weight: float,
    vec: BranchingVector,
    spine_child: int,
) -> None:
    # children with zero weight head subtrees stuck at S = -inf that can
    # never cross a finite level (and carry no spine mass), so skip them
    for j, c in enumerate(vec.weights, start=1):
        if c <= 0.0:
            continue
        frontier.push(
            NodeState(
                index=child(index, j),
                log_weight=log_weight + math.log(c),
                on_spine=(j == spine_child),
            )
        )


def is_estimate(
    model: Model,
    ctx: TiltContext,
    t: float,
    n: int,
    seeds: SeedSpec,
    variant: EstimatorVariant = EstimatorVariant.GENERAL,
    node_budget: int = DEFAULT_NODE_BUDGET,
    parallelism: int = 1,
) -> EstimateSummary:
    """Average ``n`` independent replications of Z(t)."""

    def task(rng: np.random.Generator) -> ISRun:
        return run_single(
            model, ctx, t, rng, variant=variant, node_budget=node_budget
        )

    runs = run_replications(task, n, seeds, parallelism=parallelism)
    return aggregate(runs)


def terminal_generation_profile(
    model: Model,
    ctx: TiltContext,
    t_grid: list[float],
    n: int,
    seeds: SeedSpec,
    variant: EstimatorVariant = EstimatorVariant.GENERAL,
    node_budget: int = DEFAULT_NODE_BUDGET,
    parallelism: int = 1,
) -> list[tuple[float, float, float]]:
    """Rows (t, mean crossing generation, t / mu): the crossing generation
    grows like t over the spine drift as t gets large."""
    rows = []
    for k, t in enumerate(t_grid):
        summary = is_estimate(
            model,
            ctx,
            t,
            n,
            seeds.child(seeds.stream_id + k),
            variant=variant,
            node_budget=node_budget,
            parallelism=parallelism,
        )
        rows.append((t, summary.mean_terminal_gen, t / ctx.mu))
    return rows
