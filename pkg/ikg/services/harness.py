"""
Macro-replication engine.

Each replication is an independent end-to-end run of one policy on one
instance, seeded from (base_seed, policy label, replication index). The
aggregation only sums per-replication outcomes in replication order, so the
result does not depend on how many worker processes ran the replications.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from ikg import settings
from ikg.errors import ConfigError, ConvergenceError
from ikg.services.acquisition import BEST_ARM_POLICIES, PolicyChoice, VARIANT_POLICIES, select_arm
from ikg.services.gaussian_model import (
    EpsilonGood,
    Feasibility,
    ProblemInstance,
    draw_sample,
    initial_state,
    target_estimate,
    true_target,
    update_posterior,
)
from ikg.services.presets import published_budgets, resolve_instance
from ikg.services.rates import allocation_for
from ikg.services.variants import approximate_pcs, select_arm_variant

logger = logging.getLogger(__name__)


def check_policy_goal(policy: PolicyChoice, goal) -> None:
    """Reject policies that cannot pursue the instance's goal."""
    if policy.name == "equal":
        return
    if isinstance(goal, Feasibility):
        if policy.name != "ikg_f":
            raise ConfigError(f"policy {policy.name} cannot run on a feasible goal")
    elif policy.name == "ikg_f":
        raise ConfigError("ikg_f needs a feasible goal")
    elif policy.name == "ikg_eps" and not isinstance(goal, EpsilonGood):
        raise ConfigError("ikg_eps needs an eps_good goal")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: str | None = None
    goal: Literal["bai", "eps_good", "feasible"] | None = None
    instance: ProblemInstance | None = None
    policies: list[PolicyChoice] = Field(min_length=1)
    budgets: list[int] | None = None
    macro_reps: int = Field(default=settings.DEFAULT_MACRO_REPS, ge=1)
    n0: int = Field(default=settings.DEFAULT_N0, ge=1)
    base_seed: int = Field(default=settings.DEFAULT_BASE_SEED, ge=0, le=2**64 - 1)
    parallelism: int = Field(default=1, ge=1)
    generator: Literal["PCG64"] = settings.RNG_ALGORITHM
    seed_scheme: Literal["seedsequence-blake2b64"] = settings.SEED_SCHEME

    _instance: ProblemInstance = PrivateAttr()
    _budgets: tuple[int, ...] = PrivateAttr()

    @model_validator(mode="after")
    def _resolve(self) -> "ExperimentConfig":
        if self.instance is not None and (self.preset is not None or self.goal is not None):
            raise ValueError("give either preset/goal or an inline instance, not both")
        instance = resolve_instance(self.preset, self.goal, self.instance)

        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate policies in {labels}")
        for policy in self.policies:
            check_policy_goal(policy, instance.goal)

        if self.budgets is None:
            if self.preset is None:
                raise ValueError("budgets are required for an inline instance")
            budgets = published_budgets(self.preset, self.goal)
        else:
            budgets = tuple(self.budgets)
        if not budgets:
            raise ValueError("at least one budget is required")
        if any(b <= a for a, b in zip(budgets, budgets[1:])):
            raise ValueError(f"budgets must be strictly increasing, got {list(budgets)}")
        if budgets[0] < instance.k * self.n0:
            raise ValueError(
                f"first budget {budgets[0]} is below k * n0 = {instance.k * self.n0}"
            )

        self._instance = instance
        self._budgets = tuple(int(b) for b in budgets)
        return self

    @property
    def resolved_instance(self) -> ProblemInstance:
        return self._instance

    @property
    def resolved_budgets(self) -> tuple[int, ...]:
        return self._budgets


def load_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e.errors(include_url=False)}") from e


class PfsRow(BaseModel):
    policy: str
    budget: int
    pfs: float = Field(ge=0, le=1)
    ci_half_width: float
    ci_low: float
    ci_high: float
    reps: int
    approx_pcs: float


class SamplingRateRow(BaseModel):
    policy: str
    arm: int
    empirical_rate: float
    theoretical_rate: float | None = None


class ExperimentResult(BaseModel):
    preset: str | None
    goal: str
    instance_name: str | None
    k: int
    base_seed: int
    macro_reps: int
    budgets: list[int]
    generator: str = settings.RNG_ALGORITHM
    seed_scheme: str = settings.SEED_SCHEME
    rows: list[PfsRow]
    sampling_rates: list[SamplingRateRow]

    def pfs_curve(self, policy: str) -> list[tuple[int, float]]:
        return [(r.budget, r.pfs) for r in self.rows if r.policy == policy]


# Seeds

def policy_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8")).digest()[:8], "little")


def replication_seed(base_seed: int, label: str, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, policy_key(label), rep])


def make_rng(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


# One replication

@dataclass(frozen=True)
class ReplicationOutcome:
    correct: tuple[bool, ...]
    pulls: np.ndarray
    approx_pcs: tuple[float, ...]


def choose_arm(policy: PolicyChoice, state, goal, rng, ranking_measure: int = 0) -> int:
    if policy.name in VARIANT_POLICIES:
        return select_arm_variant(policy, state, goal, rng, ranking_measure)
    if policy.name in BEST_ARM_POLICIES:
        return select_arm(policy, state, goal, rng, ranking_measure)
    raise ConfigError(f"unknown policy {policy.name}")


def run_replication(
    instance: ProblemInstance,
    policy: PolicyChoice,
    budgets: Sequence[int] | int,
    n0: int,
    seed,
) -> ReplicationOutcome:
    """
    Pull every arm n0 times, then follow the policy until the last budget,
    recording whether the estimated target is correct at each checkpoint.
    """
    checkpoints = (budgets,) if isinstance(budgets, int) else tuple(budgets)
    k, goal, r = instance.k, instance.goal, instance.ranking_measure
    if checkpoints[0] < k * n0:
        raise ConfigError(f"budget {checkpoints[0]} is below k * n0 = {k * n0}")
    check_policy_goal(policy, goal)

    rng = make_rng(seed)
    truth = true_target(instance).selection
    state = initial_state(instance)
    for arm in range(k):
        for _ in range(n0):
            state = update_posterior(state, arm, draw_sample(instance, arm, rng))

    correct: list[bool] = []
    approx: list[float] = []
    t = k * n0
    for checkpoint in checkpoints:
        while t < checkpoint:
            arm = choose_arm(policy, state, goal, rng, r)
            state = update_posterior(state, arm, draw_sample(instance, arm, rng))
            t += 1
        correct.append(target_estimate(state, goal, r).selection == truth)
        approx.append(approximate_pcs(state, goal, r))
    return ReplicationOutcome(correct=tuple(correct), pulls=state.pulls.copy(), approx_pcs=tuple(approx))


def _replication_task(args) -> ReplicationOutcome:
    instance, policy, budgets, n0, base_seed, rep = args
    return run_replication(instance, policy, budgets, n0, replication_seed(base_seed, policy.label, rep))


# Aggregation

def binomial_half_width(p: float, reps: int) -> float:
    return settings.CI_Z * math.sqrt(p * (1.0 - p) / reps)


def theoretical_allocation(instance: ProblemInstance, policy: PolicyChoice) -> list[float] | None:
    """Limiting sampling rates of `policy`, or None where no closed form applies."""
    if policy.name == "ei":
        return None
    try:
        return allocation_for(instance, policy.name, policy.beta).w
    except ConvergenceError as e:
        logger.warning("no theoretical rates for %s: %s", policy.label, e)
        return None


def _run_tasks(tasks: list, parallelism: int) -> list[ReplicationOutcome]:
    if parallelism <= 1:
        return [_replication_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_replication_task, tasks, chunksize=max(1, len(tasks) // (4 * parallelism))))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    instance = config.resolved_instance
    budgets = config.resolved_budgets
    reps = config.macro_reps
    logger.info(
        "experiment %s: %d policies, budgets=%s, reps=%d, workers=%d",
        instance.name or "custom",
        len(config.policies),
        list(budgets),
        reps,
        config.parallelism,
    )

    tasks = [
        (instance, policy, budgets, config.n0, config.base_seed, rep)
        for policy in config.policies
        for rep in range(reps)
    ]
    outcomes = _run_tasks(tasks, config.parallelism)

    rows: list[PfsRow] = []
    rate_rows: list[SamplingRateRow] = []
    for p, policy in enumerate(config.policies):
        mine = outcomes[p * reps : (p + 1) * reps]
        correct = np.array([o.correct for o in mine], dtype=bool)
        approx = np.array([o.approx_pcs for o in mine], dtype=float)
        pfs = 1.0 - correct.mean(axis=0)
        for j, budget in enumerate(budgets):
            p_hat = float(pfs[j])
            half = binomial_half_width(p_hat, reps)
            rows.append(
                PfsRow(
                    policy=policy.label,
                    budget=budget,
                    pfs=p_hat,
                    ci_half_width=half,
                    ci_low=max(0.0, p_hat - half),
                    ci_high=min(1.0, p_hat + half),
                    reps=reps,
                    approx_pcs=float(approx[:, j].mean()),
                )
            )

        empirical = np.mean([o.pulls / budgets[-1] for o in mine], axis=0)
        theory = theoretical_allocation(instance, policy)
        for arm in range(instance.k):
            rate_rows.append(
                SamplingRateRow(
                    policy=policy.label,
                    arm=arm + 1,
                    empirical_rate=float(empirical[arm]),
                    theoretical_rate=None if theory is None else theory[arm],
                )
            )
        logger.info("%s: pfs=%.3f at n=%d", policy.label, float(pfs[-1]), budgets[-1])

    return ExperimentResult(
        preset=None if config.preset is None else config.preset.split("/", 1)[0],
        goal=instance.goal.kind,
        instance_name=instance.name,
        k=instance.k,
        base_seed=config.base_seed,
        macro_reps=reps,
        budgets=list(budgets),
        rows=rows,
        sampling_rates=rate_rows,
    )
