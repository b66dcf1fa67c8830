import math

import numpy as np
import pytest

from spinetail import (
    BudgetExceededError,
    EmptySampleError,
    EstimatorVariant,
    ISRun,
    SeedSpec,
    aggregate,
    run_replications,
    run_single,
    summarize_values,
)

from conftest import mean_and_se


def _const_run(z):
    return ISRun(
        z_value=z,
        tau=1,
        terminal_index=(1,),
        hit_on_spine=z > 0,
        v_tau=0.0,
        nodes_expanded=1,
        elapsed=0.0,
    )


def test_seedspec_reproducible():
    a = SeedSpec(42, stream_id=3).rng().random(5)
    b = SeedSpec(42, stream_id=3).rng().random(5)
    assert np.array_equal(a, b)
    c = SeedSpec(42, stream_id=4).rng().random(5)
    assert not np.array_equal(a, c)


def test_parallelism_does_not_change_results(nb_model, nb_ctx):
    def task(rng):
        return run_single(
            nb_model, nb_ctx, 1.0, rng, variant=EstimatorVariant.INDEPENDENT_Q
        )

    serial = run_replications(task, 64, SeedSpec(5), parallelism=1)
    threaded = run_replications(task, 64, SeedSpec(5), parallelism=4)
    assert [r.z_value for r in serial] == [r.z_value for r in threaded]
    assert [r.terminal_index for r in serial] == [
        r.terminal_index for r in threaded
    ]


def test_constant_task_aggregates_exactly():
    runs = [_const_run(0.25) for _ in range(10)]
    s = aggregate(runs)
    assert s.mean == 0.25
    assert s.std_err == 0.0
    assert s.prop_nonzero == 1.0
    assert s.rel_err == 0.0


def test_aggregate_hand_arithmetic():
    s = aggregate([_const_run(0.0), _const_run(0.0), _const_run(1.0)])
    assert s.mean == pytest.approx(1.0 / 3.0)
    assert s.prop_nonzero == pytest.approx(1.0 / 3.0)
    # sample sd of (0,0,1) is 0.57735, over sqrt(3)
    assert s.std_err == pytest.approx(0.57735 / math.sqrt(3), rel=1e-4)


def test_aggregate_all_zero_flags_relative_error():
    s = aggregate([_const_run(0.0) for _ in range(5)])
    assert s.mean == 0.0
    assert s.rel_err is None
    assert s.prop_nonzero == 0.0


def test_aggregate_weighted_merge_property():
    rng = np.random.default_rng(0)
    a = [_const_run(float(z)) for z in rng.random(7)]
    b = [_const_run(float(z)) for z in rng.random(13)]
    merged = aggregate(a + b)
    wa, wb = aggregate(a), aggregate(b)
    expect = (wa.mean * wa.n + wb.mean * wb.n) / (wa.n + wb.n)
    assert merged.mean == pytest.approx(expect, rel=1e-12)


def test_aggregate_counts_discards_and_requires_data():
    exc = BudgetExceededError(10, 10)
    s = aggregate([_const_run(1.0), exc, _const_run(0.0)])
    assert s.discarded == 1
    assert s.n == 2
    with pytest.raises(EmptySampleError):
        aggregate([exc, exc])


def test_budget_errors_collected_not_raised(nb_model, nb_ctx):
    def task(rng):
        return run_single(nb_model, nb_ctx, 30.0, rng, node_budget=5)

    out = run_replications(task, 8, SeedSpec(1))
    assert all(isinstance(r, BudgetExceededError) for r in out)


def test_other_errors_propagate():
    def task(rng):
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        run_replications(task, 3, SeedSpec(1))


def test_stream_independence_lag_correlation(nb_model, nb_ctx):
    def task(rng):
        return run_single(
            nb_model, nb_ctx, 0.5, rng, variant=EstimatorVariant.INDEPENDENT_Q
        )

    runs = run_replications(task, 4000, SeedSpec(9))
    z = np.array([r.z_value for r in runs])
    z = z - z.mean()
    corr = float(np.sum(z[:-1] * z[1:]) / np.sum(z * z))
    assert abs(corr) <= 4.0 / math.sqrt(len(z))


def test_welford_matches_numpy_on_small_values():
    rng = np.random.default_rng(2)
    zs = rng.random(1000) * 1e-6
    s = aggregate([_const_run(float(z)) for z in zs])
    assert s.mean == pytest.approx(float(zs.mean()), rel=1e-12)
    assert s.std_err == pytest.approx(
        float(zs.std(ddof=1) / math.sqrt(len(zs))), rel=1e-10
    )


def test_summarize_values():
    m, se = summarize_values([1.0, 2.0, 3.0])
    assert m == 2.0
    assert se == pytest.approx(1.0 / math.sqrt(3))
    with pytest.raises(EmptySampleError):
        summarize_values([])
