"""
Built-in problem instances and their published reference numbers.

Means and noise levels are hard-coded; arm indices in target strings are
1-indexed to match how the problems are usually described.
"""

from __future__ import annotations

import logging

from ikg.errors import ConfigError
from ikg.services.gaussian_model import (
    ArmSpec,
    BestArm,
    BestArmEstimate,
    EpsilonGood,
    EpsilonGoodEstimate,
    ProblemInstance,
    canonical_feasibility,
    load_instance,
    true_target,
)

logger = logging.getLogger(__name__)

GOALS = ("bai", "eps_good", "feasible")

_EX1_M1 = [0.1927, 0.6438, 3.0594, 3.0220, 1.3753, 1.4215, 0.9108, 1.0126, 0.1119, 1.8808]
_EX1_M2 = [0.4350, 0.7240, 1.1566, 0.8560, 3.4712, 0.8248, 3.8797, 1.9819, 3.2431, 1.4315]


def _ex3_means() -> list[list[float]]:
    rows = []
    for x in range(1, 11):
        y1 = -0.05 * x**2
        y2 = -0.06 * (7 - x) if x <= 6 else 0.06 * (x - 6)
        rows.append([y1, y2])
    return rows


def _one_measure(means: list[float], variances: list[float]) -> dict:
    return {
        "means": [[m] for m in means],
        "noise_stds": [[v**0.5] for v in variances],
    }


PRESET_DATA = {
    "example1": {
        "means": [list(pair) for pair in zip(_EX1_M1, _EX1_M2)],
        "noise_stds": [[1.0, 1.0]] * 10,
        "epsilon": 0.1,
        "thresholds": [2.0, 2.0],
        "senses": ["le", "le"],
    },
    "example2": {
        "means": [list(pair) for pair in zip(_EX1_M1, _EX1_M2)],
        # N(0, 4) noise on both measures of arms 1-5.
        "noise_stds": [[2.0, 2.0]] * 5 + [[1.0, 1.0]] * 5,
        "epsilon": 0.1,
        "thresholds": [2.0, 2.0],
        "senses": ["le", "le"],
    },
    "example3": {
        "means": _ex3_means(),
        "noise_stds": [[1.0, 1.0]] * 10,
        "epsilon": 0.5,
        "thresholds": [-0.5, 0.0],
        "senses": ["ge", "le"],
    },
    "dose_finding": {
        "means": [[0.151, 0.259], [0.184, 0.184], [0.209, 0.209], [0.171, 0.293], [0.06, 0.16]],
        "noise_stds": [[0.5, 0.5]] * 5,
        "epsilon": 0.03,
        "thresholds": [0.18, 0.25],
        "senses": ["ge", "le"],
    },
    "drug_selection": {
        **_one_measure(
            [5.8676, 5.6469, 5.8765, 5.8298, 5.6332],
            [3.2756, 3.4171, 3.2727, 3.3198, 3.3251],
        ),
        "epsilon": 0.003,
        "thresholds": [5.6],
        "senses": ["ge"],
    },
    "caption853": {
        **_one_measure(
            [1.1400, 1.0779, 1.4160, 1.0779, 1.1081, 1.1467, 1.1333, 1.1075, 1.1026, 1.4900],
            [0.1418, 0.0991, 0.4871, 0.0728, 0.0977, 0.1809, 0.1843, 0.0970, 0.0932, 0.4843],
        ),
        "epsilon": 0.1,
        "thresholds": [1.4],
        "senses": ["ge"],
    },
    "caption854": {
        **_one_measure(
            [1.1986, 1.1890, 1.1400, 1.2621, 1.1544, 1.0339, 1.1349, 1.2786, 1.1765, 1.1367],
            [0.1879, 0.2279, 0.1346, 0.3186, 0.1314, 0.0330, 0.1337, 0.3167, 0.1858, 0.1478],
        ),
        "epsilon": 0.05,
        "thresholds": [1.25],
        "senses": ["ge"],
    },
}

# (budgets, {policy: pfs at each budget}) from 100 macro-replications.
PUBLISHED_RESULTS = {
    "bai": {
        "example1": ((1000, 5000), {"equal": (0.38, 0.22), "ei": (0.36, 0.21), "ttei": (0.25, 0.07), "kg": (0.29, 0.14), "ikg": (0.21, 0.03)}),
        "example2": ((4400, 18000), {"equal": (0.44, 0.31), "ei": (0.40, 0.28), "ttei": (0.32, 0.09), "kg": (0.32, 0.13), "ikg": (0.23, 0.03)}),
        "example3": ((400, 1000), {"equal": (0.25, 0.13), "ei": (0.28, 0.22), "ttei": (0.13, 0.02), "kg": (0.14, 0.03), "ikg": (0.09, 0.01)}),
        "dose_finding": ((1200, 13000), {"equal": (0.35, 0.05), "ei": (0.46, 0.21), "ttei": (0.31, 0.03), "kg": (0.40, 0.03), "ikg": (0.29, 0.01)}),
        "drug_selection": ((2400, 98000), {"equal": (0.43, 0.27), "ei": (0.46, 0.37), "ttei": (0.55, 0.28), "kg": (0.44, 0.28), "ikg": (0.38, 0.23)}),
        "caption853": ((1600, 3000), {"equal": (0.17, 0.11), "ei": (0.14, 0.12), "ttei": (0.04, 0.01), "kg": (0.04, 0.01), "ikg": (0.02, 0.00)}),
        "caption854": ((12000, 18000), {"equal": (0.26, 0.18), "ei": (0.26, 0.23), "ttei": (0.10, 0.06), "kg": (0.11, 0.05), "ikg": (0.07, 0.04)}),
    },
    "eps_good": {
        "example1": ((1000, 4000), {"equal": (0.54, 0.20), "ikg_eps": (0.17, 0.03)}),
        "example2": ((2400, 12000), {"equal": (0.65, 0.28), "ikg_eps": (0.29, 0.00)}),
        "example3": ((400, 4000), {"equal": (0.61, 0.26), "ikg_eps": (0.48, 0.03)}),
        "dose_finding": ((1600, 6000), {"equal": (0.46, 0.18), "ikg_eps": (0.34, 0.06)}),
        "drug_selection": ((2600, 90000), {"equal": (0.62, 0.37), "ikg_eps": (0.60, 0.27)}),
        "caption853": ((4000, 10000), {"equal": (0.28, 0.19), "ikg_eps": (0.10, 0.02)}),
        "caption854": ((9400, 15000), {"equal": (0.14, 0.05), "ikg_eps": (0.11, 0.03)}),
    },
    "feasible": {
        "example1": ((3400, 11000), {"equal": (0.34, 0.26), "ikg_f": (0.23, 0.02)}),
        "example2": ((4800, 14000), {"equal": (0.33, 0.23), "ikg_f": (0.24, 0.01)}),
        "example3": ((2200, 4800), {"equal": (0.22, 0.14), "ikg_f": (0.04, 0.00)}),
        "dose_finding": ((2000, 4000), {"equal": (0.22, 0.18), "ikg_f": (0.14, 0.01)}),
        "drug_selection": ((100000, 140000), {"equal": (0.03, 0.03), "ikg_f": (0.01, 0.01)}),
        "caption853": ((4000, 10000), {"equal": (0.36, 0.29), "ikg_f": (0.20, 0.07)}),
        "caption854": ((30600, 44000), {"equal": (0.18, 0.07), "ikg_f": (0.05, 0.00)}),
    },
}


def _split(name: str, goal: str | None) -> tuple[str, str]:
    if goal is None and "/" in name:
        name, goal = name.split("/", 1)
    if name not in PRESET_DATA:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_DATA)}")
    if goal not in GOALS:
        raise ConfigError(f"unknown goal {goal!r} for preset {name}; choose from {', '.join(GOALS)}")
    return name, goal


def preset(name: str, goal: str | None = None) -> ProblemInstance:
    """Instance for `name` under `goal`; also accepts "name/goal"."""
    name, goal = _split(name, goal)
    if name not in PUBLISHED_RESULTS[goal]:
        raise ConfigError(f"preset {name} does not define goal {goal}")
    data = PRESET_DATA[name]
    arms = [ArmSpec(means=m, noise_stds=s) for m, s in zip(data["means"], data["noise_stds"])]
    label = f"{name}/{goal}"
    logger.debug("resolving preset %s", label)

    if goal == "feasible":
        return canonical_feasibility(arms, data["thresholds"], data["senses"], name=label)
    chosen = EpsilonGood(epsilon=data["epsilon"]) if goal == "eps_good" else BestArm()
    return ProblemInstance(arms=arms, goal=chosen, name=label)


def published_budgets(name: str, goal: str | None = None) -> tuple[int, int]:
    name, goal = _split(name, goal)
    return PUBLISHED_RESULTS[goal][name][0]


def published_pfs(name: str, goal: str | None = None) -> dict[str, tuple[float, float]]:
    name, goal = _split(name, goal)
    return dict(PUBLISHED_RESULTS[goal][name][1])


def describe_target(instance: ProblemInstance) -> str:
    target = true_target(instance)
    if isinstance(target, BestArmEstimate):
        return f"best_arm={target.best_arm + 1}"
    members = ",".join(str(i + 1) for i in sorted(target.selection))
    if isinstance(target, EpsilonGoodEstimate):
        return f"good_set={members}"
    return f"feasible_set={members}"


def list_presets() -> list[dict]:
    rows = []
    for name in PRESET_DATA:
        for goal in GOALS:
            if name not in PUBLISHED_RESULTS[goal]:
                continue
            instance = preset(name, goal)
            rows.append(
                {
                    "name": name,
                    "goal": goal,
                    "k": instance.k,
                    "m": instance.m,
                    "target": describe_target(instance),
                }
            )
    return rows


def resolve_instance(
    preset_name: str | None = None,
    goal: str | None = None,
    instance: ProblemInstance | dict | None = None,
) -> ProblemInstance:
    """Single entry point for "a preset, or an inline instance"."""
    if instance is not None:
        if preset_name is not None:
            raise ConfigError("give either a preset or an inline instance, not both")
        if isinstance(instance, ProblemInstance):
            return instance
        return load_instance(instance)
    if preset_name is None:
        raise ConfigError("a preset name or an inline instance is required")
    return preset(preset_name, goal)
