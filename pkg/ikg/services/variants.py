"""
iKG variants for epsilon-good identification (iKG-eps) and feasible-arm
identification (iKG-F), plus the union-bound approximation of the
probability of correct selection those policies climb.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import logsumexp

from ikg.errors import ConfigError, DegenerateStateError
from ikg.services.acquisition import PolicyChoice, VARIANT_POLICIES, ikg_gap_log_values, log_exp_gain
from ikg.services.gaussian_model import (
    BestArm,
    EpsilonGood,
    Feasibility,
    FeasibilityContext,
    PosteriorState,
    lookahead_arrays,
    target_estimate,
)

logger = logging.getLogger(__name__)


def ikg_eps_log_values(
    state: PosteriorState, epsilon: float, target, ranking_measure: int = 0
) -> np.ndarray:
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    return ikg_gap_log_values(state, target.best_arm, epsilon, ranking_measure)


def ikg_eps_values(
    state: PosteriorState, epsilon: float, target, ranking_measure: int = 0
) -> np.ndarray:
    return np.exp(ikg_eps_log_values(state, epsilon, target, ranking_measure))


def ikg_eps_value(
    state: PosteriorState, arm: int, epsilon: float, target, ranking_measure: int = 0
) -> float:
    if not 0 <= arm < state.k:
        raise DegenerateStateError(f"arm index {arm} out of range for {state.k} arms")
    return float(ikg_eps_values(state, epsilon, target, ranking_measure)[arm])


def feasibility_context(state: PosteriorState, goal: Feasibility) -> FeasibilityContext:
    if not isinstance(goal, Feasibility):
        raise ConfigError("feasibility context needs a feasibility goal")
    if len(goal.thresholds) != state.m:
        raise ConfigError(f"feasibility needs {state.m} thresholds, got {len(goal.thresholds)}")
    return target_estimate(state, goal)


def _violated_mask(state: PosteriorState, ctx: FeasibilityContext) -> np.ndarray:
    mask = np.zeros((state.k, state.m), dtype=bool)
    for i, measures in enumerate(ctx.violated):
        mask[i, list(measures)] = True
    return mask


def _check_context(state: PosteriorState, ctx: FeasibilityContext) -> None:
    if len(ctx.thresholds) != state.m or len(ctx.violated) != state.k:
        raise DegenerateStateError("feasibility context does not match the posterior dimensions")
    fresh = target_estimate(state, Feasibility(thresholds=list(ctx.thresholds)))
    if fresh != ctx:
        raise DegenerateStateError("feasibility context is stale for this posterior")


def ikg_f_log_values(state: PosteriorState, ctx: FeasibilityContext) -> np.ndarray:
    """
    Log of the one-step gain in the union-bound approximation of the
    probability of correct feasibility determination, for every arm.

    Estimated-feasible arms add one exponential difference per measure.
    Estimated-infeasible arms sum the exponents of their violated measures
    before a single exponentiation.
    """
    if not state.all_sampled():
        raise DegenerateStateError("every arm must be sampled at least once")
    next_var, shift_var = lookahead_arrays(state)
    gamma = np.asarray(ctx.thresholds, dtype=float)
    num = (gamma - state.post_mean) ** 2
    cur = state.post_var
    nxt = next_var + shift_var

    with np.errstate(divide="ignore"):
        values = logsumexp(log_exp_gain(num, cur, nxt), axis=1)

    violated = _violated_mask(state, ctx)
    a = np.where(violated, num / (2.0 * cur), 0.0).sum(axis=1)
    b = np.where(violated, num / (2.0 * nxt), 0.0).sum(axis=1)
    infeasible = violated.any(axis=1)
    with np.errstate(divide="ignore"):
        joint = -a + np.log(-np.expm1(a - b))
    values[infeasible] = joint[infeasible]
    return values


def ikg_f_values(state: PosteriorState, ctx: FeasibilityContext) -> np.ndarray:
    return np.exp(ikg_f_log_values(state, ctx))


def ikg_f_value(state: PosteriorState, arm: int, ctx: FeasibilityContext) -> float:
    if not 0 <= arm < state.k:
        raise DegenerateStateError(f"arm index {arm} out of range for {state.k} arms")
    _check_context(state, ctx)
    return float(ikg_f_values(state, ctx)[arm])


def select_arm_variant(
    policy: PolicyChoice,
    state: PosteriorState,
    goal,
    rng: np.random.Generator,
    ranking_measure: int = 0,
) -> int:
    """Pick the next arm for iKG-eps or iKG-F; ties go to the lowest index."""
    if policy.name not in VARIANT_POLICIES:
        raise ConfigError(f"{policy.name} is not an iKG variant")
    if state.k == 0 or not state.all_sampled():
        raise DegenerateStateError("select_arm_variant needs every arm sampled at least once")

    if policy.name == "ikg_eps":
        if not isinstance(goal, EpsilonGood):
            raise ConfigError("ikg_eps needs an eps_good goal")
        target = target_estimate(state, goal, ranking_measure)
        values = ikg_eps_log_values(state, goal.epsilon, target, ranking_measure)
    else:
        if not isinstance(goal, Feasibility):
            raise ConfigError("ikg_f needs a feasible goal")
        values = ikg_f_log_values(state, feasibility_context(state, goal))
    return int(np.argmax(values))


def approximate_pcs(state: PosteriorState, goal, ranking_measure: int = 0) -> float:
    """
    Union-bound approximation of the probability of correct selection at the
    current posterior, with each tail probability replaced by its Gaussian
    exponential bound. The value may be negative when many arms are close.
    """
    if not state.all_sampled():
        raise DegenerateStateError("every arm must be sampled at least once")

    if isinstance(goal, Feasibility):
        ctx = feasibility_context(state, goal)
        gamma = np.asarray(ctx.thresholds, dtype=float)
        exponent = (gamma - state.post_mean) ** 2 / (2.0 * state.post_var)
        violated = _violated_mask(state, ctx)
        infeasible = violated.any(axis=1)
        feasible_terms = np.exp(-exponent).sum(axis=1)
        infeasible_terms = np.exp(-np.where(violated, exponent, 0.0).sum(axis=1))
        return float(1.0 - np.where(infeasible, infeasible_terms, feasible_terms).sum())

    if not isinstance(goal, (BestArm, EpsilonGood)):
        raise ConfigError(f"unsupported goal {goal!r}")
    shift = goal.epsilon if isinstance(goal, EpsilonGood) else 0.0
    mu = state.post_mean[:, ranking_measure]
    var = state.post_var[:, ranking_measure]
    best = int(np.argmax(mu))
    others = np.arange(state.k) != best
    exponent = (mu[others] - mu[best] + shift) ** 2 / (2.0 * (var[others] + var[best]))
    return float(1.0 - np.exp(-exponent).sum())
