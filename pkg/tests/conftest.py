import numpy as np
import pytest

from ikg.services.gaussian_model import ArmSpec, PosteriorState, ProblemInstance


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte-Carlo reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def build_state(means, pulls, noise_std=1.0) -> PosteriorState:
    """Posterior after `pulls` samples whose sample means are `means`."""
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    pulls = np.asarray(pulls, dtype=np.int64)
    std = np.asarray(noise_std, dtype=float)
    if std.ndim == 1:
        std = std[:, None]
    noise_var = np.broadcast_to(std**2, means.shape).copy()
    return PosteriorState(
        post_mean=means.copy(),
        post_var=noise_var / pulls[:, None],
        pulls=pulls,
        round=int(pulls.sum()),
        noise_var=noise_var,
    )


def make_instance(means, stds=1.0, goal=None, name=None) -> ProblemInstance:
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    stds = np.asarray(stds, dtype=float)
    if stds.ndim == 1:
        stds = stds[:, None]
    stds = np.broadcast_to(stds, means.shape)
    arms = [ArmSpec(means=m.tolist(), noise_stds=s.tolist()) for m, s in zip(means, stds)]
    kwargs = {"arms": arms, "name": name}
    if goal is not None:
        kwargs["goal"] = goal
    return ProblemInstance(**kwargs)


@pytest.fixture
def state_from():
    return build_state


@pytest.fixture
def instance_from():
    return make_instance
