import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from scipy.stats import norm

from ikg.errors import ConfigError, DegenerateStateError
from ikg.services.acquisition import PolicyChoice, ikg_values
from ikg.services.gaussian_model import (
    BestArm,
    BestArmEstimate,
    EpsilonGood,
    Feasibility,
    FeasibilityContext,
    target_from_means,
)
from ikg.services.variants import (
    approximate_pcs,
    feasibility_context,
    ikg_eps_log_values,
    ikg_eps_value,
    ikg_eps_values,
    ikg_f_log_values,
    ikg_f_value,
    ikg_f_values,
    select_arm_variant,
)

FIXTURE_CHECKS = [HealthCheck.function_scoped_fixture]


class FixedRng:
    def random(self):
        return 0.5


# iKG-eps

@settings(max_examples=100, deadline=None, suppress_health_check=FIXTURE_CHECKS)
@given(
    means=st.lists(st.floats(min_value=-2, max_value=2), min_size=2, max_size=6, unique=True),
    pulls=st.integers(min_value=1, max_value=50),
)
def test_tiny_epsilon_recovers_ikg(state_from, means, pulls):
    state = state_from(means, [pulls] * len(means))
    target = BestArmEstimate(best_arm=int(np.argmax(means)))
    np.testing.assert_allclose(
        ikg_eps_values(state, 1e-12, target), ikg_values(state, target), rtol=1e-9, atol=1e-12
    )


def test_zero_shifted_gap_gives_zero(state_from):
    state = state_from([1.0, 0.75, 0.1], [4, 4, 4])
    assert ikg_eps_value(state, 1, 0.25, BestArmEstimate(best_arm=0)) == 0.0


def test_ikg_eps_matches_count_form(state_from):
    mu = np.array([0.9, 1.2, 0.5, 0.7])
    pulls = np.array([3, 6, 2, 4])
    eps = 0.1
    values = ikg_eps_values(state_from(mu, pulls), eps, BestArmEstimate(best_arm=1))

    var = 1.0 / pulls
    look = (pulls + 2) / (pulls + 1) ** 2
    expected = np.zeros(4)
    for i in (0, 2, 3):
        g2 = (mu[i] - mu[1] + eps) ** 2
        expected[i] = math.exp(-g2 / (2 * (var[i] + var[1]))) - math.exp(-g2 / (2 * (look[i] + var[1])))
        expected[1] += math.exp(-g2 / (2 * (var[i] + var[1]))) - math.exp(-g2 / (2 * (var[i] + look[1])))
    np.testing.assert_allclose(values, expected, rtol=1e-12)


def test_ikg_eps_rejects_nonpositive_epsilon(state_from):
    state = state_from([1.0, 0.0], [2, 2])
    with pytest.raises(ConfigError):
        ikg_eps_values(state, 0.0, BestArmEstimate(best_arm=0))
    with pytest.raises(DegenerateStateError):
        ikg_eps_value(state, 4, 0.1, BestArmEstimate(best_arm=0))


def test_ikg_eps_stays_informative_when_posterior_concentrates(state_from):
    state = state_from([0.0, 1.0, 2.0], [3000, 3000, 3000])
    goal = EpsilonGood(epsilon=0.1)
    logs = ikg_eps_log_values(state, goal.epsilon, BestArmEstimate(best_arm=2))
    assert np.all(np.isfinite(logs))
    assert select_arm_variant(PolicyChoice(name="ikg_eps"), state, goal, FixedRng()) == int(np.argmax(logs))
    assert int(np.argmax(logs)) != 0


# iKG-F

def test_ikg_f_single_feasible_arm_matches_both_variance_forms(state_from):
    # m = 1, T = 10, sigma = 1, gamma - mu = 1
    state = state_from([[0.0], [3.0]], [10, 10])
    ctx = feasibility_context(state, Feasibility(thresholds=[1.0]))
    assert ctx.feasible == frozenset({0})
    expected = math.exp(-5.0) - math.exp(-1.0 * 121 / (2 * 12))
    assert ikg_f_value(state, 0, ctx) == pytest.approx(expected, rel=1e-12)


def test_ikg_f_zero_exponent_for_violated_measure_on_threshold(state_from):
    state = state_from([[0.5, -1.0], [-0.5, -1.0]], [3, 3])
    ctx = FeasibilityContext(
        thresholds=(0.5, 0.0),
        feasible=frozenset({1}),
        infeasible=frozenset({0}),
        satisfied=(frozenset({1}), frozenset({0, 1})),
        violated=(frozenset({0}), frozenset()),
    )
    values = ikg_f_values(state, ctx)
    assert values[0] == 0.0
    assert values[1] > 0.0


def test_ikg_f_infeasible_arm_sums_violated_exponents(state_from):
    state = state_from([[1.0, 2.0], [-1.0, -1.0]], [4, 4])
    ctx = feasibility_context(state, Feasibility(thresholds=[0.0, 0.0]))
    var = 0.25
    look = 6 / 25
    a = (1.0 + 4.0) / (2 * var)
    b = (1.0 + 4.0) / (2 * look)
    assert ikg_f_value(state, 0, ctx) == pytest.approx(math.exp(-a) - math.exp(-b), rel=1e-12)


def test_ikg_f_vanishes_as_pulls_grow(state_from):
    goal = Feasibility(thresholds=[0.0])
    values = []
    for t in (2, 20, 200, 2000, 20000):
        state = state_from([[-0.3], [0.4]], [t, t])
        values.append(ikg_f_values(state, feasibility_context(state, goal)))
    values = np.array(values)
    assert np.all(np.diff(values[1:], axis=0) < 0)
    assert values[-1].max() < 1e-100


def test_ikg_f_log_values_match_linear_values(state_from):
    state = state_from([[-0.4, 0.3], [0.2, -0.5], [0.6, 0.1]], [4, 6, 5])
    ctx = feasibility_context(state, Feasibility(thresholds=[0.0, 0.0]))
    np.testing.assert_allclose(np.exp(ikg_f_log_values(state, ctx)), ikg_f_values(state, ctx), rtol=1e-12)
    assert np.all(ikg_f_values(state, ctx) > 0)


def test_ikg_f_stays_informative_when_posterior_concentrates(state_from):
    # exponents of 1800, 1800 and 1250: every linear value underflows to zero
    state = state_from([[-3.0], [3.0], [-2.5]], [400, 400, 400])
    goal = Feasibility(thresholds=[0.0])
    logs = ikg_f_log_values(state, feasibility_context(state, goal))
    assert np.all(np.isfinite(logs))
    assert logs[0] == pytest.approx(logs[1], rel=1e-9)
    assert logs[2] > logs[0] + 500
    assert select_arm_variant(PolicyChoice(name="ikg_f"), state, goal, FixedRng()) == 2


def test_ikg_f_value_rejects_stale_context(state_from):
    state = state_from([[-1.0], [1.0]], [2, 2])
    stale = target_from_means(np.array([[1.0], [1.0]]), Feasibility(thresholds=[0.0]))
    with pytest.raises(DegenerateStateError):
        ikg_f_value(state, 0, stale)


def test_feasibility_context_needs_matching_goal(state_from):
    state = state_from([[-1.0], [1.0]], [2, 2])
    with pytest.raises(ConfigError):
        feasibility_context(state, BestArm())
    with pytest.raises(ConfigError):
        feasibility_context(state, Feasibility(thresholds=[0.0, 0.0]))


# Selection

@pytest.mark.parametrize(
    "policy,goal",
    [("ikg_eps", EpsilonGood(epsilon=0.2)), ("ikg_f", Feasibility(thresholds=[1.0]))],
)
def test_variant_symmetric_state_picks_lowest_index(state_from, policy, goal):
    state = state_from([0.0, 0.0, 0.0], [5, 5, 5])
    assert select_arm_variant(PolicyChoice(name=policy), state, goal, FixedRng()) == 0


def test_variant_picks_argmax(state_from):
    state = state_from([[0.1], [0.9], [-2.0]], [3, 3, 3])
    goal = Feasibility(thresholds=[0.5])
    expected = int(np.argmax(ikg_f_values(state, feasibility_context(state, goal))))
    assert select_arm_variant(PolicyChoice(name="ikg_f"), state, goal, FixedRng()) == expected
    assert expected in (0, 1)


def test_variant_goal_mismatch(state_from):
    state = state_from([1.0, 0.0], [2, 2])
    with pytest.raises(ConfigError):
        select_arm_variant(PolicyChoice(name="ikg_eps"), state, BestArm(), FixedRng())
    with pytest.raises(ConfigError):
        select_arm_variant(PolicyChoice(name="ikg_f"), state, EpsilonGood(epsilon=0.1), FixedRng())
    with pytest.raises(ConfigError):
        select_arm_variant(PolicyChoice(name="kg"), state, BestArm(), FixedRng())


# Union-bound approximation

def test_approximate_pcs_best_arm(state_from):
    state = state_from([1.0, 0.5, 0.0], [2, 2, 2])
    expected = 1.0 - math.exp(-0.25 / 2.0) - math.exp(-1.0 / 2.0)
    assert approximate_pcs(state, BestArm()) == pytest.approx(expected, rel=1e-12)
    sharp = state_from([1.0, 0.5, 0.0], [10**4] * 3)
    assert approximate_pcs(sharp, BestArm()) == pytest.approx(1.0, abs=1e-12)


def test_approximate_pcs_epsilon_and_feasibility(state_from):
    state = state_from([1.0, 0.5], [2, 2])
    assert approximate_pcs(state, EpsilonGood(epsilon=0.5)) == pytest.approx(0.0, abs=1e-15)

    fstate = state_from([[-1.0], [1.0]], [2, 2])
    expected = 1.0 - 2 * math.exp(-1.0)
    assert approximate_pcs(fstate, Feasibility(thresholds=[0.0])) == pytest.approx(expected, rel=1e-12)


def test_union_bound_is_below_simulated_best_arm_pcs():
    mu = np.array([0.5, 0.2, 0.0])
    var = np.full(3, 1.0 / 5)
    rhs = 1.0 - sum(norm.sf((mu[0] - mu[i]) / math.sqrt(var[0] + var[i])) for i in (1, 2))

    rng = np.random.default_rng(3)
    theta = mu + np.sqrt(var) * rng.standard_normal((1_000_000, 3))
    hits = (theta[:, 0] > theta[:, 1]) & (theta[:, 0] > theta[:, 2])
    p = hits.mean()
    se = math.sqrt(p * (1 - p) / hits.size)
    assert rhs <= p + 3 * se


def test_union_bound_is_below_simulated_feasibility_pcs():
    mu = np.array([[-0.3, -0.2], [0.4, -0.1], [0.3, 0.5]])
    sd = math.sqrt(1.0 / 5)
    above = norm.sf(-mu / sd)  # P(theta_ij > 0)
    rhs = 1.0 - above[0].sum() - (1 - above[1, 0]) - (1 - above[2, 0]) * (1 - above[2, 1])

    rng = np.random.default_rng(4)
    theta = mu + sd * rng.standard_normal((1_000_000, 3, 2))
    ok = theta <= 0.0
    hits = ok[:, 0].all(axis=1) & ~ok[:, 1].all(axis=1) & ~ok[:, 2].all(axis=1)
    p = hits.mean()
    se = math.sqrt(p * (1 - p) / hits.size)
    assert rhs <= p + 3 * se
