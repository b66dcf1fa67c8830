import math

import numpy as np
import pytest

from spinetail import (
    BranchingMM1,
    DegenerateQ,
    DiscreteTable,
    ExpPoisson,
    GammaGeometric,
    IdenticalPareto,
    NonBranchingExp,
    SeedSpec,
    SimplexGamma,
    UniformCount,
    solve_alpha,
)


@pytest.fixture(scope="session")
def mm1_model():
    return BranchingMM1(theta=5.0, lam=0.25, poisson_param=2.0, y_rate=9.0)


@pytest.fixture(scope="session")
def mm1_ctx(mm1_model):
    return solve_alpha(mm1_model)


@pytest.fixture(scope="session")
def simplex_model():
    return SimplexGamma(a=0.25, b=1.0, n_law=UniformCount(1, 3), q_mode="two_times_b")


@pytest.fixture(scope="session")
def simplex_ctx(simplex_model):
    return solve_alpha(simplex_model)


@pytest.fixture(scope="session")
def nb_model():
    # single offspring, exact tail 0.5 * exp(-t), alpha = 1, mu = 1/2
    return NonBranchingExp(theta=2.0, lam=1.0, q_law=DegenerateQ(1.0))


@pytest.fixture(scope="session")
def nb_ctx(nb_model):
    return solve_alpha(nb_model)


@pytest.fixture(scope="session")
def example8_table():
    # two offspring, weights (2/3, 0) w.p. 3/4 and (1, 1) w.p. 1/4; the
    # moment root is 1 but the drift there is negative
    return DiscreteTable(
        outcomes=(((2.0 / 3.0, 0.0), 1.0), ((1.0, 1.0), 1.0)),
        probs=(0.75, 0.25),
    )


@pytest.fixture(scope="session")
def example1_table():
    # two offspring with weights 1/2 and Q == 1/2: the maximum is -log 2 a.s.
    return DiscreteTable(outcomes=(((0.5, 0.5), 0.5),), probs=(1.0,))


@pytest.fixture(scope="session")
def positive_drift_table():
    # single offspring, weight 1.6 w.p. 0.4 and 0.2 w.p. 0.6, Q == 1;
    # bounded weights make every estimator moment finite
    return DiscreteTable(
        outcomes=(((1.6,), 1.0), ((0.2,), 1.0)), probs=(0.4, 0.6)
    )


def all_solvable_models():
    """Every built-in family at test parameters admitting a valid context."""
    return [
        ("non_branching_exp", NonBranchingExp(theta=2.0, lam=1.0)),
        ("branching_mm1", BranchingMM1(theta=5.0, lam=0.25, poisson_param=2.0, y_rate=9.0)),
        ("identical_pareto", IdenticalPareto(a=3.0, b=0.4, n_law=UniformCount(1, 3))),
        ("exp_poisson", ExpPoisson(lam=3.0)),
        ("gamma_geometric", GammaGeometric(beta=0.2)),
        ("simplex_gamma", SimplexGamma(a=0.25, b=1.0, n_law=UniformCount(1, 3))),
        (
            "discrete_table",
            DiscreteTable(outcomes=(((1.6,), 1.0), ((0.2,), 1.0)), probs=(0.4, 0.6)),
        ),
    ]


def mean_and_se(values):
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def reweighting_gate(model, ctx, n, rng, se_factor=4.0, cap=5.0):
    """Tilted draws against weighted original draws: for bounded test
    functions g the tilted mean of g must equal the original-measure mean of
    g times the weight mass D.

    The test functions are indicator bins on the offspring count and on the
    first log-weight, each multiplied by min(1, cap / D).  The capping keeps
    both sides of the identity bounded (the reweighted side becomes
    h * min(D, cap)); with bare indicators the reweighted side inherits the
    raw D, whose tail index under the original measure can sit barely above
    one, where sample means and their standard errors are meaningless."""
    alpha = ctx.alpha
    tilted = [model.sample_tilted(ctx, rng) for _ in range(n)]
    plain = [model.sample_p(rng) for _ in range(n)]
    d_tilted = np.array([v.spine_mass(alpha) for v in tilted])
    d_plain = np.array([v.spine_mass(alpha) for v in plain])
    g_tilted = np.minimum(1.0, cap / d_tilted)
    g_plain = np.minimum(d_plain, cap)

    n_tilted = np.array([v.n_offspring for v in tilted])
    n_plain = np.array([v.n_offspring for v in plain])
    logc_tilted = np.array(
        [math.log(v.weights[0]) if v.weights[0] > 0 else -math.inf for v in tilted]
    )
    logc_plain = np.array(
        [math.log(v.weights[0]) if v.weights[0] > 0 else -math.inf for v in plain]
    )

    checks = []
    for k in (1, 2, 3):
        checks.append((n_tilted == k, n_plain == k, f"count=={k}"))
    # bin edges from the tilted sample: both sides of the identity then
    # carry real mass even when the tilt shifts the weights far up
    for q in (0.25, 0.5, 0.75):
        edge = float(np.quantile(logc_tilted[np.isfinite(logc_tilted)], q))
        checks.append((logc_tilted <= edge, logc_plain <= edge, f"logC<= q{q}"))

    failures = []
    for h_tilted, h_plain, label in checks:
        lhs, lhs_se = mean_and_se(h_tilted.astype(float) * g_tilted)
        rhs, rhs_se = mean_and_se(h_plain.astype(float) * g_plain)
        if abs(lhs - rhs) > se_factor * (lhs_se + rhs_se + 1e-12):
            failures.append(
                f"{label}: tilted {lhs:.4f}+-{lhs_se:.4f} vs "
                f"reweighted {rhs:.4f}+-{rhs_se:.4f}"
            )
    return failures


@pytest.fixture(scope="session")
def seeds():
    return SeedSpec(20240801)
