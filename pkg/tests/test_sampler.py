import math

import numpy as np
import pytest

from spinetail import (
    BudgetExceededError,
    EstimatorVariant,
    SeedSpec,
    is_estimate,
    run_single,
    solve_alpha,
    terminal_generation_profile,
)

from conftest import mean_and_se


def test_negative_level_independent_q_is_exactly_one(mm1_model, mm1_ctx):
    # the root perturbation is at least one, so level -0.5 is crossed at the
    # root: the crossing node is the spine start and the walk is at zero
    rng = SeedSpec(1).rng()
    for _ in range(300):
        run = run_single(
            mm1_model, mm1_ctx, -0.5, rng, variant=EstimatorVariant.INDEPENDENT_Q
        )
        assert run.z_value == 1.0
        assert run.tau == 0
        assert run.terminal_index == ()
        assert run.hit_on_spine
        assert run.v_tau == 0.0
        assert run.nodes_expanded == 1


def test_negative_level_general_variant_averages_one(positive_drift_table):
    # with bounded weights the inverse mass is bounded, so the plain average
    # and its standard error are trustworthy
    ctx = solve_alpha(positive_drift_table)
    rng = SeedSpec(2).rng()
    vals = [
        run_single(positive_drift_table, ctx, -1.0, rng).z_value
        for _ in range(40_000)
    ]
    m, se = mean_and_se(vals)
    assert abs(m - 1.0) <= 3 * se


def test_independent_q_variant_rejected_for_dependent_q(simplex_model, simplex_ctx):
    rng = SeedSpec(3).rng()
    with pytest.raises(ValueError):
        run_single(
            simplex_model,
            simplex_ctx,
            1.0,
            rng,
            variant=EstimatorVariant.INDEPENDENT_Q,
        )


def test_closed_form_tail_small(nb_model, nb_ctx, seeds):
    summary = is_estimate(
        nb_model, nb_ctx, 1.0, 20_000, seeds.child(7),
        variant=EstimatorVariant.INDEPENDENT_Q,
    )
    exact = 0.5 * math.exp(-1.0)
    assert abs(summary.mean - exact) <= 4 * summary.std_err
    assert summary.prop_nonzero == 1.0  # single path: always on the spine


def test_independent_q_value_identity(nb_model, nb_ctx):
    # nonzero values of the independent-Q estimator are exactly
    # exp(-alpha * walk value at the crossing)
    rng = SeedSpec(4).rng()
    for _ in range(200):
        run = run_single(
            nb_model, nb_ctx, 0.7, rng, variant=EstimatorVariant.INDEPENDENT_Q
        )
        if run.z_value > 0:
            assert run.z_value == pytest.approx(
                math.exp(-nb_ctx.alpha * run.v_tau)
            )
            assert run.v_tau > 0.7  # perturbation is zero here, so V alone crosses


def test_general_value_bound(mm1_model, mm1_ctx):
    rng = SeedSpec(5).rng()
    for _ in range(200):
        run = run_single(mm1_model, mm1_ctx, 0.5, rng)
        assert run.z_value >= 0.0
        assert run.z_value == 0.0 or run.hit_on_spine
        assert math.isnan(run.v_tau) or run.hit_on_spine


def test_determinism_bit_identical(mm1_model, mm1_ctx):
    def runs(seed_spec):
        return [
            run_single(
                mm1_model,
                mm1_ctx,
                1.0,
                seed_spec.substream_rng(i),
                variant=EstimatorVariant.INDEPENDENT_Q,
            )
            for i in range(50)
        ]

    a = runs(SeedSpec(77))
    b = runs(SeedSpec(77))
    for x, y in zip(a, b):
        assert x.z_value == y.z_value
        assert x.terminal_index == y.terminal_index
        assert x.tau == y.tau
        assert x.nodes_expanded == y.nodes_expanded


def test_budget_exceeded(nb_model, nb_ctx):
    rng = SeedSpec(6).rng()
    with pytest.raises(BudgetExceededError):
        run_single(nb_model, nb_ctx, 50.0, rng, node_budget=10)


def test_budget_discards_are_counted(nb_model, nb_ctx, seeds):
    # level 12 needs about 24 spine steps; budget 30 keeps most but not all
    summary = is_estimate(
        nb_model, nb_ctx, 12.0, 400, seeds.child(8),
        variant=EstimatorVariant.INDEPENDENT_Q, node_budget=30,
    )
    assert summary.discarded > 0
    assert summary.n + summary.discarded == 400


def test_terminal_profile_tracks_level_over_drift(nb_model, nb_ctx, seeds):
    rows = terminal_generation_profile(
        nb_model, nb_ctx, [40.0], 300, seeds.child(9),
        variant=EstimatorVariant.INDEPENDENT_Q,
    )
    (t, mean_gen, t_over_mu), = rows
    assert t_over_mu == pytest.approx(80.0)
    assert 0.9 <= mean_gen / t_over_mu <= 1.1


def test_negative_level_terminal_generation_zero(mm1_model, mm1_ctx, seeds):
    rows = terminal_generation_profile(
        mm1_model, mm1_ctx, [-1.0], 200, seeds.child(10),
        variant=EstimatorVariant.INDEPENDENT_Q,
    )
    assert rows[0][1] == 0.0
