import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ikg.errors import ConfigError, DegenerateStateError
from ikg.services.gaussian_model import (
    ArmSpec,
    BestArm,
    BestArmEstimate,
    EpsilonGood,
    Feasibility,
    canonical_feasibility,
    draw_sample,
    initial_state,
    load_instance,
    lookahead_arrays,
    lookahead_variance,
    target_estimate,
    target_from_means,
    true_target,
    update_posterior,
)
from ikg.services.presets import preset


def _two_arm_doc(**overrides):
    doc = {
        "arms": [
            {"means": [1.0], "noise_stds": [1.0]},
            {"means": [0.0], "noise_stds": [2.0]},
        ]
    }
    doc.update(overrides)
    return doc


@settings(max_examples=200, deadline=None)
@given(
    stream=st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=60),
    sigma=st.floats(min_value=0.1, max_value=10.0),
)
def test_sequential_updates_match_batch_posterior(stream, sigma):
    instance = load_instance({"arms": [{"means": [0.0], "noise_stds": [sigma]}, {"means": [1.0], "noise_stds": [1.0]}]})
    state = initial_state(instance)
    for x in stream:
        state = update_posterior(state, 0, [x])

    n = len(stream)
    assert state.pulls[0] == n
    assert state.round == n
    assert_allclose(state.post_mean[0, 0], np.mean(stream), rtol=1e-12, atol=1e-10)
    assert state.post_var[0, 0] == pytest.approx(sigma**2 / n, rel=1e-12)
    # untouched arm keeps the non-informative prior
    assert state.pulls[1] == 0
    assert np.isinf(state.post_var[1, 0])


def test_first_pull_sets_sample_and_noise_variance():
    instance = load_instance(_two_arm_doc())
    state = update_posterior(initial_state(instance), 1, [0.3])
    assert state.post_mean[1, 0] == 0.3
    assert state.post_var[1, 0] == 4.0
    assert not state.all_sampled()


def test_variance_recursion_per_measure():
    instance = load_instance(
        {"arms": [{"means": [0.0, 0.0], "noise_stds": [1.0, 3.0]}, {"means": [1.0, 0.0], "noise_stds": [1.0, 1.0]}]}
    )
    state = initial_state(instance)
    for x in ([1.0, 2.0], [0.0, -1.0], [2.0, 5.0], [1.0, 2.0]):
        state = update_posterior(state, 0, x)
    assert_allclose(state.post_var[0], [1.0 / 4, 9.0 / 4], rtol=1e-14)
    assert_allclose(state.post_mean[0], [1.0, 2.0], rtol=1e-14)
    assert state.pulls.tolist() == [4, 0]


def test_update_does_not_mutate_previous_state():
    instance = load_instance(_two_arm_doc())
    before = initial_state(instance)
    after = update_posterior(before, 0, [2.0])
    assert before.pulls[0] == 0
    assert np.isinf(before.post_var[0, 0])
    assert after.pulls[0] == 1


def test_update_rejects_bad_arm_and_shape():
    instance = load_instance(_two_arm_doc())
    state = initial_state(instance)
    with pytest.raises(DegenerateStateError):
        update_posterior(state, 5, [0.0])
    with pytest.raises(DegenerateStateError):
        update_posterior(state, 0, [0.0, 1.0])


@pytest.mark.parametrize("pulls", [1, 2, 5, 10, 100])
def test_lookahead_count_form(state_from, pulls):
    sigma = 1.7
    state = state_from([0.4, 0.1], [pulls, 3], noise_std=sigma)
    next_var, shift_var = lookahead_variance(state, 0, 0)
    assert next_var == pytest.approx(sigma**2 / (pulls + 1), rel=1e-12)
    assert next_var + shift_var == pytest.approx((pulls + 2) * sigma**2 / (pulls + 1) ** 2, rel=1e-12)


def test_lookahead_arrays_match_scalar_version(state_from):
    state = state_from([[0.1, 0.2], [0.5, -0.3], [1.0, 0.0]], [2, 7, 4], noise_std=[[1.0, 0.5], [2.0, 1.0], [0.3, 3.0]])
    next_var, shift_var = lookahead_arrays(state)
    for i in range(3):
        for j in range(2):
            nv, sv = lookahead_variance(state, i, j)
            assert next_var[i, j] == pytest.approx(nv, rel=1e-15)
            assert shift_var[i, j] == pytest.approx(sv, rel=1e-15)


def test_lookahead_needs_sampled_arm():
    instance = load_instance(_two_arm_doc())
    state = update_posterior(initial_state(instance), 0, [0.0])
    with pytest.raises(DegenerateStateError):
        lookahead_variance(state, 1, 0)
    with pytest.raises(DegenerateStateError):
        lookahead_arrays(state)
    with pytest.raises(DegenerateStateError):
        target_estimate(state, BestArm())


def test_mean_shift_variance_matches_simulation(state_from):
    # one more sample drawn around the current mean moves the mean by nv / s^2 * (x - mu)
    sigma, pulls = 1.3, 4
    state = state_from([0.2, 0.0], [pulls, 1], noise_std=sigma)
    next_var, shift_var = lookahead_variance(state, 0, 0)
    rng = np.random.default_rng(11)
    x = rng.normal(0.2, sigma, size=400_000)
    shifts = (state.post_mean[0, 0] / state.post_var[0, 0] + x / sigma**2) * next_var - 0.2
    assert shifts.var() == pytest.approx(shift_var, rel=0.01)


def test_draw_sample_is_reproducible():
    instance = load_instance(_two_arm_doc())
    a = draw_sample(instance, 1, np.random.default_rng(5))
    b = draw_sample(instance, 1, np.random.default_rng(5))
    assert a.shape == (1,)
    assert_allclose(a, b)


def test_draw_sample_centers_on_the_true_mean():
    instance = preset("example1", "bai")
    rng = np.random.default_rng(2024)
    draws = np.array([draw_sample(instance, 2, rng)[0] for _ in range(1_000_000)])
    assert instance.means[2, 0] == 3.0594
    assert draws.mean() == pytest.approx(3.0594, abs=0.005)


@pytest.mark.parametrize(
    "doc",
    [
        _two_arm_doc(arms=[{"means": [1.0], "noise_stds": [1.0]}, {"means": [1.0], "noise_stds": [1.0]}]),
        _two_arm_doc(arms=[{"means": [1.0], "noise_stds": [0.0]}, {"means": [0.0], "noise_stds": [1.0]}]),
        _two_arm_doc(arms=[{"means": [1.0, 2.0], "noise_stds": [1.0]}, {"means": [0.0], "noise_stds": [1.0]}]),
        _two_arm_doc(arms=[{"means": [1.0], "noise_stds": [1.0]}]),
        _two_arm_doc(goal={"kind": "eps_good", "epsilon": 1.0}),
        _two_arm_doc(goal={"kind": "eps_good", "epsilon": -0.1}),
        _two_arm_doc(goal={"kind": "feasible", "thresholds": [0.0]}),
        _two_arm_doc(goal={"kind": "feasible", "thresholds": [0.5, 0.5]}),
        _two_arm_doc(ranking_measure=1),
        _two_arm_doc(colour="blue"),
    ],
)
def test_invalid_instances_raise_config_error(doc):
    with pytest.raises(ConfigError):
        load_instance(doc)


def test_ties_among_non_best_arms_are_allowed():
    instance = load_instance(
        {"arms": [{"means": [1.0], "noise_stds": [1.0]}, {"means": [0.0], "noise_stds": [1.0]}, {"means": [0.0], "noise_stds": [1.0]}]}
    )
    assert true_target(instance) == BestArmEstimate(best_arm=0)


def test_canonical_feasibility_negates_ge_measures():
    arms = [ArmSpec(means=[0.2, 0.1], noise_stds=[1.0, 1.0]), ArmSpec(means=[0.1, 0.3], noise_stds=[1.0, 1.0])]
    instance = canonical_feasibility(arms, [0.18, 0.25], ["ge", "le"])
    assert instance.goal.thresholds == [-0.18, 0.25]
    assert_allclose(instance.means, [[-0.2, 0.1], [-0.1, 0.3]])
    assert true_target(instance).selection == frozenset({0})


def test_target_from_means_eps_good_and_feasibility():
    means = np.array([[1.0, 0.0], [0.95, 2.0], [0.5, 0.0]])
    eps = target_from_means(means, EpsilonGood(epsilon=0.1))
    assert eps.best_arm == 0
    assert eps.good_set == frozenset({0, 1})

    ctx = target_from_means(means, Feasibility(thresholds=[0.9, 1.0]))
    assert ctx.feasible == frozenset({2})
    assert ctx.infeasible == frozenset({0, 1})
    assert ctx.violated[1] == frozenset({0, 1})
    assert ctx.satisfied[0] == frozenset({1})


@settings(max_examples=100, deadline=None)
@given(
    means=st.lists(
        st.lists(st.floats(min_value=-3, max_value=3), min_size=2, max_size=2), min_size=2, max_size=6
    ),
    thresholds=st.lists(st.floats(min_value=-3, max_value=3), min_size=2, max_size=2),
)
def test_feasibility_partition_is_consistent(means, thresholds):
    ctx = target_from_means(np.array(means), Feasibility(thresholds=thresholds))
    k = len(means)
    assert ctx.feasible | ctx.infeasible == frozenset(range(k))
    assert not ctx.feasible & ctx.infeasible
    for i in range(k):
        assert (i in ctx.feasible) == (not ctx.violated[i])
        assert ctx.satisfied[i] | ctx.violated[i] == frozenset({0, 1})
