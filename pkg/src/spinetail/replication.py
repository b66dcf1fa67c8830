"""Deterministic seeded replication engine and statistics aggregation.

Every replication gets its own independent random stream derived from
``(master_seed, stream_id, replication_index)`` through numpy's
``SeedSequence`` spawn keys.  Streams never depend on scheduling, so results
are bit-identical at any parallelism level, and replication i of a run can be
reproduced in isolation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceededError, EmptySampleError


@dataclass(frozen=True)
class SeedSpec:
    """Addressable random stream: a 64-bit master seed plus a stream id."""

    master_seed: int
    stream_id: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(
                entropy=self.master_seed, spawn_key=(self.stream_id,)
            )
        )

    def substream_rng(self, index: int) -> np.random.Generator:
        """Independent stream for replication ``index`` of this spec."""
        return np.random.default_rng(
            np.random.SeedSequence(
                entropy=self.master_seed, spawn_key=(self.stream_id, index)
            )
        )

    def child(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(master_seed=self.master_seed, stream_id=stream_id)


@dataclass(frozen=True)
class EstimateSummary:
    """Aggregate of one batch of replications."""

    n: int
    mean: float
    std_err: float
    rel_err: float | None
    prop_nonzero: float
    mean_terminal_gen: float
    mean_tau: float
    mean_time_s: float
    discarded: int = 0


def run_replications(
    task: Callable[[np.random.Generator], object],
    n: int,
    seeds: SeedSpec,
    parallelism: int = 1,
) -> list[object]:
    """Run ``task`` n times on independent streams; results ordered by index.

    Budget overruns are collected in place of their result (so the caller
    can count discards); any other exception propagates.
    """
    if n < 1:
        raise ValueError("need at least one replication")

    def one(i: int):
        try:
            return task(seeds.substream_rng(i))
        except BudgetExceededError as exc:
            return exc

    if parallelism <= 1:
        return [one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, range(n)))


def aggregate(runs: Sequence[object]) -> EstimateSummary:
    """Summarize importance-sampling replications.

    Budget-exceeded entries are excluded from every statistic and counted in
    ``discarded``; including them as zeros would bias the mean downward and
    as crossings upward, so they are dropped loudly instead.
    """
    kept = [r for r in runs if not isinstance(r, BudgetExceededError)]
    discarded = len(runs) - len(kept)
    if not kept:
        raise EmptySampleError("no usable replications to aggregate")

    # single-pass moments; values can sit at the 1e-6 scale where naive
    # sum-of-squares cancellation would dominate
    mean = 0.0
    m2 = 0.0
    nonzero = 0
    sum_term = 0.0
    sum_tau = 0.0
    n_tau = 0
    sum_time = 0.0
    for k, run in enumerate(kept, start=1):
        z = run.z_value
        delta = z - mean
        mean += delta / k
        m2 += delta * (z - mean)
        if z != 0.0:
            nonzero += 1
        sum_term += len(run.terminal_index)
        if run.hit_on_spine:
            sum_tau += run.tau
            n_tau += 1
        sum_time += run.elapsed

    n = len(kept)
    var = m2 / (n - 1) if n > 1 else 0.0
    std_err = math.sqrt(var / n)
    rel_err = std_err / mean if mean != 0.0 else None
    return EstimateSummary(
        n=n,
        mean=mean,
        std_err=std_err,
        rel_err=rel_err,
        prop_nonzero=nonzero / n,
        mean_terminal_gen=sum_term / n,
        mean_tau=sum_tau / n_tau if n_tau else math.nan,
        mean_time_s=sum_time / n,
        discarded=discarded,
    )


def summarize_values(values: Sequence[float]) -> tuple[float, float]:
    """Plain mean and standard error of a scalar sample."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptySampleError("empty sample")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
