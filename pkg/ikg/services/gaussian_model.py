"""
Ground-truth sampling model and Bayesian posterior bookkeeping.

Arms return m-dimensional samples whose components are independent Gaussians
with known standard deviations. Posteriors start from the non-informative
prior (mean 0, infinite variance), so after T >= 1 pulls an arm's posterior
variance on measure j is exactly sigma_j^2 / T and its posterior mean is the
sample mean.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from ikg.errors import ConfigError, DegenerateStateError

logger = logging.getLogger(__name__)


# Problem description models

class ArmSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    means: list[float]
    noise_stds: list[float]

    @model_validator(mode="after")
    def _check_shape(self) -> "ArmSpec":
        if not self.means:
            raise ValueError("an arm needs at least one measure")
        if len(self.means) != len(self.noise_stds):
            raise ValueError(
                f"means has {len(self.means)} measures but noise_stds has {len(self.noise_stds)}"
            )
        if any(not s > 0 for s in self.noise_stds):
            raise ValueError(f"noise_stds must be strictly positive, got {self.noise_stds}")
        return self


class BestArm(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["bai"] = "bai"


class EpsilonGood(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["eps_good"] = "eps_good"
    epsilon: float = Field(gt=0)


class Feasibility(BaseModel):
    """Constraints mu_ij <= thresholds[j] on every measure j."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["feasible"] = "feasible"
    thresholds: list[float]


Goal = Annotated[Union[BestArm, EpsilonGood, Feasibility], Field(discriminator="kind")]


class ProblemInstance(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    arms: list[ArmSpec] = Field(min_length=2)
    goal: Goal = Field(default_factory=BestArm)
    ranking_measure: int = Field(default=0, ge=0)
    name: str | None = None

    _means: np.ndarray = PrivateAttr()
    _stds: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_instance(self) -> "ProblemInstance":
        m = len(self.arms[0].means)
        if any(len(arm.means) != m for arm in self.arms):
            raise ValueError("every arm must report the same number of measures")
        if self.ranking_measure >= m:
            raise ValueError(f"ranking_measure {self.ranking_measure} out of range for {m} measures")

        means = np.array([arm.means for arm in self.arms], dtype=float)
        ranking = means[:, self.ranking_measure]
        goal = self.goal
        if isinstance(goal, (BestArm, EpsilonGood)):
            top = ranking.max()
            if np.count_nonzero(ranking == top) > 1:
                raise ValueError("the best arm must be unique")
            if isinstance(goal, EpsilonGood) and np.any(ranking == top - goal.epsilon):
                raise ValueError(f"an arm mean lies exactly on the epsilon-good boundary {top - goal.epsilon}")
        else:
            if len(goal.thresholds) != m:
                raise ValueError(f"feasibility needs {m} thresholds, got {len(goal.thresholds)}")
            if np.any(means == np.asarray(goal.thresholds, dtype=float)):
                raise ValueError("an arm mean lies exactly on a constraint threshold")
        return self

    def model_post_init(self, __context) -> None:
        self._means = np.array([arm.means for arm in self.arms], dtype=float)
        self._stds = np.array([arm.noise_stds for arm in self.arms], dtype=float)

    @property
    def k(self) -> int:
        return len(self.arms)

    @property
    def m(self) -> int:
        return len(self.arms[0].means)

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def noise_stds(self) -> np.ndarray:
        return self._stds

    @property
    def noise_var(self) -> np.ndarray:
        return self._stds ** 2


def load_instance(data: dict) -> ProblemInstance:
    """Validate a JSON-like document into a ProblemInstance."""
    try:
        return ProblemInstance.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid problem instance: {e.errors(include_url=False)}") from e


def canonical_feasibility(
    arms: list[ArmSpec],
    thresholds: list[float],
    senses: list[Literal["le", "ge"]],
    name: str | None = None,
) -> ProblemInstance:
    """
    Build a feasibility instance from mixed constraint senses.

    A ">=" constraint on measure j is rewritten as "<=" by negating that
    measure's means and its threshold, so every instance keeps the one-sided
    form mu_ij <= gamma_j.
    """
    if len(senses) != len(thresholds):
        raise ConfigError("senses and thresholds must have equal length")
    flip = np.array([-1.0 if s == "ge" else 1.0 for s in senses])
    flipped = [
        ArmSpec(means=(np.asarray(arm.means) * flip).tolist(), noise_stds=list(arm.noise_stds))
        for arm in arms
    ]
    return ProblemInstance(
        arms=flipped,
        goal=Feasibility(thresholds=(np.asarray(thresholds, dtype=float) * flip).tolist()),
        name=name,
    )


# Posterior state and target estimates

@dataclass(frozen=True)
class PosteriorState:
    post_mean: np.ndarray
    post_var: np.ndarray
    pulls: np.ndarray
    round: int
    noise_var: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.post_mean.shape[0]

    @property
    def m(self) -> int:
        return self.post_mean.shape[1]

    def all_sampled(self) -> bool:
        return bool(np.all(self.pulls >= 1))


def initial_state(instance: ProblemInstance) -> PosteriorState:
    """Posterior under the non-informative prior, before any pull."""
    k, m = instance.k, instance.m
    return PosteriorState(
        post_mean=np.zeros((k, m)),
        post_var=np.full((k, m), np.inf),
        pulls=np.zeros(k, dtype=np.int64),
        round=0,
        noise_var=instance.noise_var.copy(),
    )


@dataclass(frozen=True)
class BestArmEstimate:
    best_arm: int

    @property
    def selection(self) -> int:
        return self.best_arm


@dataclass(frozen=True)
class EpsilonGoodEstimate:
    best_arm: int
    epsilon: float
    good_set: frozenset[int]

    @property
    def selection(self) -> frozenset[int]:
        return self.good_set


@dataclass(frozen=True)
class FeasibilityContext:
    """
    Estimated feasible/infeasible partition and, per arm, the satisfied and
    violated measures.
    """

    thresholds: tuple[float, ...]
    feasible: frozenset[int]
    infeasible: frozenset[int]
    satisfied: tuple[frozenset[int], ...]
    violated: tuple[frozenset[int], ...]

    @property
    def selection(self) -> frozenset[int]:
        return self.feasible


TargetEstimate = Union[BestArmEstimate, EpsilonGoodEstimate, FeasibilityContext]


def _check_arm(state: PosteriorState, arm: int) -> None:
    if not 0 <= arm < state.k:
        raise DegenerateStateError(f"arm index {arm} out of range for {state.k} arms")


def draw_sample(instance: ProblemInstance, arm: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= arm < instance.k:
        raise DegenerateStateError(f"arm index {arm} out of range for {instance.k} arms")
    return rng.normal(instance.means[arm], instance.noise_stds[arm])


def update_posterior(state: PosteriorState, arm: int, sample) -> PosteriorState:
    """
    Fold one sample of `arm` into the posterior with the precision-weighted
    recursion. The first pull of an arm replaces the non-informative prior
    with the sample itself and the noise variance.
    """
    _check_arm(state, arm)
    x = np.asarray(sample, dtype=float)
    if x.shape != (state.m,):
        raise DegenerateStateError(f"sample shape {x.shape} does not match {state.m} measures")

    mean = state.post_mean.copy()
    var = state.post_var.copy()
    pulls = state.pulls.copy()
    noise = state.noise_var[arm]

    if pulls[arm] == 0:
        mean[arm] = x
        var[arm] = noise
    else:
        prior_precision = 1.0 / var[arm]
        new_var = 1.0 / (prior_precision + 1.0 / noise)
        mean[arm] = (prior_precision * mean[arm] + x / noise) * new_var
        var[arm] = new_var
    pulls[arm] += 1

    return PosteriorState(
        post_mean=mean,
        post_var=var,
        pulls=pulls,
        round=state.round + 1,
        noise_var=state.noise_var,
    )


def lookahead_variance(state: PosteriorState, arm: int, measure: int) -> tuple[float, float]:
    """
    Posterior variance after one more pull of `arm`, and the variance of the
    posterior-mean shift that pull induces.
    """
    _check_arm(state, arm)
    if not 0 <= measure < state.m:
        raise DegenerateStateError(f"measure index {measure} out of range for {state.m} measures")
    if state.pulls[arm] < 1:
        raise DegenerateStateError(f"arm {arm} has never been sampled")
    noise = state.noise_var[arm, measure]
    next_var = 1.0 / (1.0 / state.post_var[arm, measure] + 1.0 / noise)
    shift_var = noise * (next_var / noise) ** 2
    return float(next_var), float(shift_var)


def lookahead_arrays(state: PosteriorState) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized lookahead_variance over every (arm, measure) pair."""
    if not state.all_sampled():
        raise DegenerateStateError("every arm must be sampled before looking ahead")
    next_var = 1.0 / (1.0 / state.post_var + 1.0 / state.noise_var)
    shift_var = state.noise_var * (next_var / state.noise_var) ** 2
    return next_var, shift_var


def target_from_means(means: np.ndarray, goal, ranking_measure: int = 0) -> TargetEstimate:
    means = np.asarray(means, dtype=float)
    if isinstance(goal, Feasibility):
        gamma = np.asarray(goal.thresholds, dtype=float)
        ok = means <= gamma
        satisfied = tuple(frozenset(np.flatnonzero(row).tolist()) for row in ok)
        violated = tuple(frozenset(np.flatnonzero(~row).tolist()) for row in ok)
        feasible = frozenset(np.flatnonzero(ok.all(axis=1)).tolist())
        return FeasibilityContext(
            thresholds=tuple(gamma.tolist()),
            feasible=feasible,
            infeasible=frozenset(range(means.shape[0])) - feasible,
            satisfied=satisfied,
            violated=violated,
        )

    ranking = means[:, ranking_measure]
    best = int(np.argmax(ranking))
    if isinstance(goal, EpsilonGood):
        good = frozenset(np.flatnonzero(ranking > ranking[best] - goal.epsilon).tolist())
        return EpsilonGoodEstimate(best_arm=best, epsilon=goal.epsilon, good_set=good)
    return BestArmEstimate(best_arm=best)


def target_estimate(state: PosteriorState, goal, ranking_measure: int = 0) -> TargetEstimate:
    if not state.all_sampled():
        raise DegenerateStateError("target estimate needs every arm sampled at least once")
    return target_from_means(state.post_mean, goal, ranking_measure)


def true_target(instance: ProblemInstance) -> TargetEstimate:
    """Ground-truth target computed from the instance's true means."""
    return target_from_means(instance.means, instance.goal, instance.ranking_measure)
