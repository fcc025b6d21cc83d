"""
Best-arm sampling policies: KG, iKG, EI, TTEI and equal allocation.

Every value function is vectorized over arms and works on the ranking
measure's column of the posterior. Selection is an argmax with ties broken
by the lowest arm index.
"""

from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import erfcx, logsumexp, ndtr

from ikg import settings
from ikg.errors import ConfigError, DegenerateStateError
from ikg.services.gaussian_model import (
    BestArmEstimate,
    EpsilonGoodEstimate,
    Feasibility,
    PosteriorState,
    lookahead_arrays,
    target_estimate,
)

logger = logging.getLogger(__name__)

PolicyName = Literal["kg", "ikg", "ei", "ttei", "equal", "ikg_eps", "ikg_f"]

BEST_ARM_POLICIES = ("kg", "ikg", "ei", "ttei", "equal")
VARIANT_POLICIES = ("ikg_eps", "ikg_f")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_PI_OVER_2 = math.sqrt(math.pi / 2.0)


class PolicyChoice(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: PolicyName
    beta: float | None = None

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, data):
        if isinstance(data, str):
            return {"name": data}
        return data

    @model_validator(mode="after")
    def _check_beta(self) -> "PolicyChoice":
        if self.name == "ttei":
            if self.beta is None:
                object.__setattr__(self, "beta", settings.DEFAULT_TTEI_BETA)
            elif not 0.0 < self.beta < 1.0:
                raise ValueError(f"TTEI needs 0 < beta < 1, got {self.beta}")
        elif self.beta is not None:
            raise ValueError(f"beta only applies to ttei, not {self.name}")
        return self

    @property
    def label(self) -> str:
        if self.name == "ttei":
            return f"ttei(beta={self.beta:g})"
        return self.name


# Numerics

def log_exp_gain(num: np.ndarray, cur: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """
    log(exp(-num / (2 cur)) - exp(-num / (2 nxt))) for nxt <= cur, evaluated
    as -a + log(-expm1(a - b)) so that neither large exponents underflow nor
    nearly equal ones cancel. Zero gaps give -inf.
    """
    a = num / (2.0 * cur)
    b = num / (2.0 * nxt)
    with np.errstate(divide="ignore"):
        return -a + np.log(-np.expm1(a - b))


def log_f(z) -> np.ndarray:
    """log of f(z) = z * Phi(z) + phi(z), stable for large negative z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z < 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = -z[neg]
        # f(-x) = phi(x) * (1 - x R(x)) with R the Mills ratio.
        tail = 1.0 - x * _SQRT_PI_OVER_2 * erfcx(x / math.sqrt(2.0))
        big = x > 1e3
        tail = np.where(big, 1.0 / x**2 - 3.0 / x**4, tail)
        out[neg] = -0.5 * x**2 - _LOG_SQRT_2PI + np.log(np.maximum(tail, np.finfo(float).tiny))
        zp = z[~neg]
        out[~neg] = np.log(zp * ndtr(zp) + np.exp(-0.5 * zp**2 - _LOG_SQRT_2PI))
    return out


def _ranking_columns(state: PosteriorState, ranking_measure: int):
    if not state.all_sampled():
        raise DegenerateStateError("every arm must be sampled at least once")
    next_var, shift_var = lookahead_arrays(state)
    r = ranking_measure
    return state.post_mean[:, r], state.post_var[:, r], next_var[:, r], shift_var[:, r]


def _check_arm(state: PosteriorState, arm: int) -> None:
    if not 0 <= arm < state.k:
        raise DegenerateStateError(f"arm index {arm} out of range for {state.k} arms")


def _second_best(mu: np.ndarray) -> np.ndarray:
    """For each arm i, max over i' != i of mu[i']."""
    order = np.argsort(-mu, kind="stable")
    top, runner_up = mu[order[0]], mu[order[1]]
    others = np.full_like(mu, top)
    others[order[0]] = runner_up
    return others


# iKG

def ikg_gap_log_values(
    state: PosteriorState, best: int, shift: float = 0.0, ranking_measure: int = 0
) -> np.ndarray:
    """
    Log of the one-step gain in the Bonferroni approximation of the
    probability of correct selection, for every arm, with gaps
    mu_i - mu_best + shift.
    """
    mu, var, next_var, shift_var = _ranking_columns(state, ranking_measure)
    num = (mu - mu[best] + shift) ** 2
    cur = var + var[best]
    values = log_exp_gain(num, cur, next_var + shift_var + var[best])

    others = np.arange(state.k) != best
    looked_best = var + next_var[best] + shift_var[best]
    best_terms = log_exp_gain(num[others], cur[others], looked_best[others])
    with np.errstate(divide="ignore"):
        values[best] = logsumexp(best_terms)
    return values


def ikg_log_values(state: PosteriorState, target, ranking_measure: int = 0) -> np.ndarray:
    return ikg_gap_log_values(state, target.best_arm, 0.0, ranking_measure)


def ikg_values(state: PosteriorState, target, ranking_measure: int = 0) -> np.ndarray:
    return np.exp(ikg_log_values(state, target, ranking_measure))


def ikg_value(state: PosteriorState, arm: int, target, ranking_measure: int = 0) -> float:
    _check_arm(state, arm)
    return float(ikg_values(state, target, ranking_measure)[arm])


# KG

def kg_log_values(state: PosteriorState, ranking_measure: int = 0) -> np.ndarray:
    mu, var, next_var, _ = _ranking_columns(state, ranking_measure)
    s = np.sqrt(var - next_var)
    z = -np.abs(mu - _second_best(mu)) / s
    return np.log(s) + log_f(z)


def kg_values(state: PosteriorState, ranking_measure: int = 0) -> np.ndarray:
    return np.exp(kg_log_values(state, ranking_measure))


def kg_value(state: PosteriorState, arm: int, ranking_measure: int = 0) -> float:
    _check_arm(state, arm)
    return float(kg_values(state, ranking_measure)[arm])


# EI

def ei_log_values(state: PosteriorState, ranking_measure: int = 0) -> np.ndarray:
    mu = state.post_mean[:, ranking_measure]
    if not state.all_sampled():
        raise DegenerateStateError("every arm must be sampled at least once")
    sd = np.sqrt(state.post_var[:, ranking_measure])
    best = int(np.argmax(mu))
    gap = mu - mu[best]
    # The leader is scored against its closest competitor.
    gap[best] = -(mu[best] - _second_best(mu)[best])
    return np.log(sd) + log_f(gap / sd)


def ei_values(state: PosteriorState, ranking_measure: int = 0) -> np.ndarray:
    return np.exp(ei_log_values(state, ranking_measure))


def ei_value(state: PosteriorState, arm: int, ranking_measure: int = 0) -> float:
    _check_arm(state, arm)
    return float(ei_values(state, ranking_measure)[arm])


def ttei_challenger(state: PosteriorState, leader: int, ranking_measure: int = 0) -> int:
    """Arm j != leader maximizing E[(theta_j - theta_leader)^+]."""
    mu = state.post_mean[:, ranking_measure]
    var = state.post_var[:, ranking_measure]
    s = np.sqrt(var + var[leader])
    scores = np.log(s) + log_f((mu - mu[leader]) / s)
    scores[leader] = -np.inf
    return int(np.argmax(scores))


# Selection

def _best_arm_target(state: PosteriorState, goal, ranking_measure: int):
    if isinstance(goal, Feasibility):
        raise ConfigError("best-arm policies need a ranking goal, not feasibility")
    target = target_estimate(state, goal, ranking_measure)
    if isinstance(target, EpsilonGoodEstimate):
        return BestArmEstimate(best_arm=target.best_arm)
    return target


def select_arm(
    policy: PolicyChoice,
    state: PosteriorState,
    goal,
    rng: np.random.Generator,
    ranking_measure: int = 0,
) -> int:
    if state.k == 0 or not state.all_sampled():
        raise DegenerateStateError("select_arm needs every arm sampled at least once")

    name = policy.name
    if name == "equal":
        return state.round % state.k
    if name not in BEST_ARM_POLICIES:
        raise ConfigError(f"{name} is not a best-arm policy")

    if name == "ikg":
        target = _best_arm_target(state, goal, ranking_measure)
        return int(np.argmax(ikg_log_values(state, target, ranking_measure)))
    if name == "kg":
        return int(np.argmax(kg_log_values(state, ranking_measure)))
    if name == "ei":
        return int(np.argmax(ei_log_values(state, ranking_measure)))

    # ttei
    leader = int(np.argmax(ei_log_values(state, ranking_measure)))
    if rng.random() < policy.beta:
        return leader
    return ttei_challenger(state, leader, ranking_measure)
