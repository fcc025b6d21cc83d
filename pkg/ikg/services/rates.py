"""
Large-deviations rates and sampling allocations.

The rate of an allocation w is the exponent of the slowest-decaying error
event:

- best arm: min over i != b of (mu_i - mu_b)^2 / (2 (s_i^2 / w_i + s_b^2 / w_b))
- epsilon-good: the same with every gap shifted by +epsilon
- feasibility: min over arms of w_i * d_i, d_i built from the per-measure
  exponents (gamma_j - mu_ij)^2 / (2 s_ij^2)

Closed forms cover KG, equal allocation and feasibility; TTEI and the optimal
allocation are solved with bracketed root finding; a grid search over the
simplex serves as an independent oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import brentq

from ikg import settings
from ikg.errors import ConfigError, ConvergenceError, GridTooLargeError
from ikg.services.gaussian_model import EpsilonGood, Feasibility, ProblemInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateKind:
    """Which rate an AllocationVector describes, with its parameters."""

    tag: str
    beta: float | None = None
    epsilon: float | None = None
    thresholds: tuple[float, ...] | None = None

    def __str__(self) -> str:
        if self.beta is not None:
            return f"{self.tag}(beta={self.beta:g})"
        if self.epsilon is not None:
            return f"{self.tag}(epsilon={self.epsilon:g})"
        return self.tag


class AllocationVector(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: str
    w: list[float]
    gamma: float = Field(ge=0)
    residuals: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _on_simplex(self) -> "AllocationVector":
        if any(not x > 0 for x in self.w):
            raise ValueError(f"sampling rates must be strictly positive, got {self.w}")
        if abs(math.fsum(self.w) - 1.0) > settings.SIMPLEX_TOL:
            raise ValueError(f"sampling rates sum to {math.fsum(self.w)!r}, not 1")
        return self

    @property
    def k(self) -> int:
        return len(self.w)

    def to_report(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "w": list(self.w),
            "gamma": self.gamma,
            "residuals": dict(self.residuals),
        }


# Rate objective

def _ranking_parts(instance: ProblemInstance):
    r = instance.ranking_measure
    mu = instance.means[:, r]
    var = instance.noise_var[:, r]
    best = int(np.argmax(mu))
    return mu, var, best


def _pair_rates(instance: ProblemInstance, W: np.ndarray, shift: float) -> np.ndarray:
    """Per-pair rates, shape (points, k - 1), for rows of allocations W."""
    mu, var, best = _ranking_parts(instance)
    others = np.arange(instance.k) != best
    gap2 = (mu[others] - mu[best] + shift) ** 2
    denom = var[others] / W[:, others] + var[best] / W[:, [best]]
    return gap2 / (2.0 * denom)


def _feasibility_exponents(instance: ProblemInstance) -> np.ndarray:
    """d_i per arm: weakest satisfied measure if feasible, summed violations if not."""
    gamma = np.asarray(instance.goal.thresholds, dtype=float)
    exponent = (gamma - instance.means) ** 2 / (2.0 * instance.noise_var)
    violated = instance.means > gamma
    infeasible = violated.any(axis=1)
    summed = np.where(violated, exponent, 0.0).sum(axis=1)
    return np.where(infeasible, summed, exponent.min(axis=1))


def _min_rates(instance: ProblemInstance, W: np.ndarray) -> np.ndarray:
    goal = instance.goal
    if isinstance(goal, Feasibility):
        return (W * _feasibility_exponents(instance)).min(axis=1)
    shift = goal.epsilon if isinstance(goal, EpsilonGood) else 0.0
    return _pair_rates(instance, W, shift).min(axis=1)


def rate_at(instance: ProblemInstance, w) -> float:
    """Goal-appropriate minimum rate at an interior allocation w."""
    w = np.asarray(w, dtype=float)
    if w.shape != (instance.k,):
        raise ConfigError(f"allocation has shape {w.shape}, expected ({instance.k},)")
    if np.any(w <= 0):
        raise ConfigError("allocation must be strictly positive")
    return float(_min_rates(instance, w[None, :])[0])


def _require_ranking(instance: ProblemInstance, what: str) -> None:
    if isinstance(instance.goal, Feasibility):
        raise ConfigError(f"{what} needs a bai or eps_good goal, not feasible")


# Closed forms

def gamma_kg(instance: ProblemInstance) -> AllocationVector:
    """Limiting KG allocation and its best-arm rate."""
    _require_ranking(instance, "gamma_kg")
    mu, var, best = _ranking_parts(instance)
    sd = np.sqrt(var)
    others = np.flatnonzero(np.arange(instance.k) != best)
    second = others[np.argmax(mu[others])]

    scaled = (mu[best] - mu[others]) / sd[others]
    c = scaled / ((mu[best] - mu[second]) / sd[second])
    s_inv = np.sum(1.0 / c)
    ratio = sd[best] / sd[second]

    w = np.empty(instance.k)
    w[best] = 1.0 / (s_inv / ratio + 1.0)
    w[others] = 1.0 / (c * (s_inv + ratio))

    # Closed-form rate, kept separate from the direct substitution as a check.
    denom = 2.0 * (
        (sd[second] * s_inv + sd[best]) * sd[best] + c * var[others] * (s_inv + ratio)
    )
    gamma = float(np.min((mu[others] - mu[best]) ** 2 / denom))
    direct = float(_pair_rates(instance, w[None, :], 0.0).min())

    w_sum = math.fsum(w.tolist())
    residuals = {
        "simplex": abs(w_sum - 1.0),
        "kg_ratio": abs(w[best] / w[second] - ratio),
        "formula_check": abs(gamma - direct) / gamma,
    }
    return AllocationVector(kind=str(RateKind("kg")), w=(w / w_sum).tolist(), gamma=gamma, residuals=residuals)


def kg_best_share(instance: ProblemInstance) -> float:
    """Share of the budget KG gives the best arm in the limit."""
    alloc = gamma_kg(instance)
    _, _, best = _ranking_parts(instance)
    return alloc.w[best]


def gamma_equal(instance: ProblemInstance) -> AllocationVector:
    w = np.full(instance.k, 1.0 / instance.k)
    return AllocationVector(
        kind=str(RateKind("equal")),
        w=w.tolist(),
        gamma=rate_at(instance, w),
        residuals={"simplex": abs(math.fsum(w.tolist()) - 1.0)},
    )


def gamma_feasibility(instance: ProblemInstance) -> AllocationVector:
    """Equal per-arm rates w_i * d_i on the simplex."""
    if not isinstance(instance.goal, Feasibility):
        raise ConfigError("gamma_feasibility needs a feasible goal")
    d = _feasibility_exponents(instance)
    if np.any(d <= 0):
        raise ConfigError("an arm mean lies on a constraint threshold")
    inv = 1.0 / d
    total = math.fsum(inv.tolist())
    w = inv / total
    gamma = 1.0 / total
    per_arm = w * d
    residuals = {
        "simplex": abs(math.fsum(w.tolist()) - 1.0),
        "rate_equality": float((per_arm.max() - per_arm.min()) / gamma),
    }
    kind = RateKind("feasible", thresholds=tuple(instance.goal.thresholds))
    return AllocationVector(kind=str(kind), w=w.tolist(), gamma=gamma, residuals=residuals)


# Root-finding solvers

def _brentq(f, lo: float, hi: float, what: str) -> float:
    try:
        root, info = brentq(
            f,
            lo,
            hi,
            xtol=settings.SOLVER_XTOL,
            rtol=settings.SOLVER_RTOL,
            maxiter=settings.SOLVER_MAXITER,
            full_output=True,
            disp=False,
        )
    except ValueError as e:
        raise ConvergenceError(f"{what}: root not bracketed ({e})", {"lo": lo, "hi": hi}) from e
    if not info.converged:
        raise ConvergenceError(f"{what}: {info.flag}", {"iterations": float(info.iterations)})
    return root


def _fill_for_best_share(mu, var, best, shift, w_best):
    """
    Give the best arm share w_best and split 1 - w_best across the other
    arms so that every pairwise rate is equal. Returns (w, gamma).
    """
    others = np.arange(len(mu)) != best
    gap2 = (mu[others] - mu[best] + shift) ** 2
    v = var[others]
    best_term = var[best] / w_best

    def shares(g):
        return v / (gap2 / (2.0 * g) - best_term)

    g_max = float(np.min(gap2 / (2.0 * best_term)))
    target = 1.0 - w_best
    g = _brentq(
        lambda x: shares(x).sum() - target,
        g_max * 1e-12,
        g_max * (1.0 - 1e-12),
        "equal-rate fill",
    )
    w = np.empty(len(mu))
    w[best] = w_best
    w[others] = shares(g)
    return w, g


def _rate_residuals(instance: ProblemInstance, w: np.ndarray, shift: float) -> tuple[float, float]:
    rates = _pair_rates(instance, w[None, :], shift)[0]
    gamma = float(rates.min())
    return gamma, float((rates.max() - rates.min()) / gamma)


def gamma_ttei(instance: ProblemInstance, beta: float) -> AllocationVector:
    """Best allocation among those giving the best arm exactly a beta share."""
    _require_ranking(instance, "gamma_ttei")
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    mu, var, best = _ranking_parts(instance)
    w, _ = _fill_for_best_share(mu, var, best, 0.0, beta)
    w = w / math.fsum(w.tolist())
    gamma, spread = _rate_residuals(instance, w, 0.0)
    residuals = {"simplex": abs(math.fsum(w.tolist()) - 1.0), "rate_equality": spread}
    return AllocationVector(kind=str(RateKind("ttei", beta=beta)), w=w.tolist(), gamma=gamma, residuals=residuals)


def solve_optimal_allocation(instance: ProblemInstance) -> AllocationVector:
    """
    Rate-optimal allocation for best-arm or epsilon-good identification.

    The outer solve moves the best arm's share until the balance condition
    w_b^2 / s_b^2 = sum_i w_i^2 / s_i^2 holds; the inner solve equalizes the
    pairwise rates for that share.
    """
    _require_ranking(instance, "solve_optimal_allocation")
    goal = instance.goal
    shift = goal.epsilon if isinstance(goal, EpsilonGood) else 0.0
    mu, var, best = _ranking_parts(instance)
    others = np.arange(instance.k) != best

    def balance(w_best: float) -> float:
        w, _ = _fill_for_best_share(mu, var, best, shift, w_best)
        return w_best**2 / var[best] - np.sum(w[others] ** 2 / var[others])

    w_best = _brentq(balance, 1e-9, 1.0 - 1e-9, "balance condition")
    w, _ = _fill_for_best_share(mu, var, best, shift, w_best)
    w = w / math.fsum(w.tolist())

    gamma, spread = _rate_residuals(instance, w, shift)
    lhs = w[best] ** 2 / var[best]
    residuals = {
        "simplex": abs(math.fsum(w.tolist()) - 1.0),
        "balance": float(abs(lhs - np.sum(w[others] ** 2 / var[others])) / lhs),
        "rate_equality": spread,
    }
    kind = RateKind("eps", epsilon=goal.epsilon) if shift else RateKind("ikg")
    worst = max(residuals.values())
    if worst > settings.RESIDUAL_TOL:
        logger.warning("optimal allocation residuals above tolerance: %s", residuals)
        raise ConvergenceError("optimal allocation did not converge", residuals)
    logger.debug("optimal allocation %s gamma=%.6g", kind, gamma)
    return AllocationVector(kind=str(kind), w=w.tolist(), gamma=gamma, residuals=residuals)


# Brute-force oracle

def _prefixes(length: int, remaining: int, tail_parts: int) -> Iterator[tuple[int, ...]]:
    if length == 0:
        yield ()
        return
    for a in range(1, remaining - (length - 1) - tail_parts + 1):
        for rest in _prefixes(length - 1, remaining - a, tail_parts):
            yield (a,) + rest


def _grid_blocks(k: int, n: int) -> Iterator[np.ndarray]:
    """Interior compositions of n into k positive parts, in blocks of rows."""
    if k == 2:
        a = np.arange(1, n)
        yield np.column_stack([a, n - a])
        return
    for prefix in _prefixes(k - 3, n, 3):
        rest = n - sum(prefix)
        a, b = np.meshgrid(np.arange(1, rest - 1), np.arange(1, rest - 1), indexing="ij")
        keep = a + b <= rest - 1
        a, b = a[keep], b[keep]
        block = np.empty((a.size, k), dtype=np.int64)
        block[:, : k - 3] = prefix
        block[:, k - 3] = a
        block[:, k - 2] = b
        block[:, k - 1] = rest - a - b
        yield block


def brute_force_allocation(instance: ProblemInstance, grid_step: float) -> AllocationVector:
    """Exhaustive maximization of the minimum rate over an interior simplex grid."""
    k = instance.k
    if k > settings.BRUTE_FORCE_MAX_ARMS:
        raise GridTooLargeError(
            f"brute force supports at most {settings.BRUTE_FORCE_MAX_ARMS} arms, got {k}"
        )
    if not settings.BRUTE_FORCE_MIN_STEP <= grid_step <= settings.BRUTE_FORCE_MAX_STEP:
        raise ConfigError(
            f"grid_step must lie in [{settings.BRUTE_FORCE_MIN_STEP}, "
            f"{settings.BRUTE_FORCE_MAX_STEP}], got {grid_step}"
        )
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise ConfigError(f"grid_step {grid_step} does not divide 1")
    points = math.comb(n - 1, k - 1)
    if points > settings.BRUTE_FORCE_MAX_POINTS:
        raise GridTooLargeError(f"{points} grid points exceed the limit {settings.BRUTE_FORCE_MAX_POINTS}")

    best_rate = -np.inf
    best_w = None
    for block in _grid_blocks(k, n):
        rates = _min_rates(instance, block / n)
        i = int(np.argmax(rates))
        if rates[i] > best_rate:
            best_rate = float(rates[i])
            best_w = block[i] / n
    logger.debug("brute force over %d points: gamma=%.6g", points, best_rate)
    return AllocationVector(
        kind=str(RateKind("oracle")),
        w=best_w.tolist(),
        gamma=best_rate,
        residuals={"simplex": abs(math.fsum(best_w.tolist()) - 1.0), "grid_step": grid_step},
    )


# Simulation output

def empirical_rate(pfs_curve) -> float:
    """
    Slope of -log(pfs) against the budget over the tail half of the curve.

    Zero estimates are dropped with a warning since their log is undefined.
    """
    points = sorted((int(n), float(p)) for n, p in pfs_curve)
    if any(p > 1.0 or p < 0.0 for _, p in points):
        raise ConfigError("pfs estimates must lie in [0, 1]")
    usable = [(n, p) for n, p in points if p > 0.0]
    dropped = len(points) - len(usable)
    if dropped:
        logger.warning("empirical_rate: dropped %d zero-pfs point(s)", dropped)
    if len(usable) < 3:
        raise ConfigError(f"empirical_rate needs at least 3 positive pfs points, got {len(usable)}")

    tail = usable[-max(3, math.ceil(len(usable) / 2)):]
    n = np.array([x for x, _ in tail], dtype=float)
    y = -np.log(np.array([p for _, p in tail]))
    slope, _ = np.polyfit(n, y, 1)
    return float(slope)


def allocation_for(instance: ProblemInstance, policy: str, beta: float | None = None) -> AllocationVector:
    """Limiting allocation of `policy` on `instance`, as reported by the CLI and the API."""
    feasible_goal = isinstance(instance.goal, Feasibility)
    if beta is not None and policy != "ttei":
        raise ConfigError(f"beta only applies to ttei, not {policy}")
    if policy == "equal":
        return gamma_equal(instance)
    if feasible_goal:
        if policy in ("ikg", "ikg_f"):
            return gamma_feasibility(instance)
        raise ConfigError(f"policy {policy} has no rate for a feasible goal")
    if policy == "kg":
        return gamma_kg(instance)
    if policy == "ttei":
        return gamma_ttei(instance, settings.DEFAULT_TTEI_BETA if beta is None else beta)
    if policy == "ikg":
        return solve_optimal_allocation(instance)
    if policy == "ikg_eps":
        if not isinstance(instance.goal, EpsilonGood):
            raise ConfigError("ikg_eps needs an eps_good goal")
        return solve_optimal_allocation(instance)
    raise ConfigError(f"policy {policy} has no closed-form or solved allocation")
