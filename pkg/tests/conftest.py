import numpy as np
import pytest

from acgap.envs import fourroom_mdp, random_mdp
from acgap.mdp import SoftmaxPolicy
from acgap.rng import make_rng


def make_instance(seed, n_states=4, n_actions=3, gamma=0.9):
    """Random MDP with a random policy and critic, all from one seed."""
    mdp = random_mdp(n_states, n_actions, seed=seed, gamma=gamma)
    rng = make_rng(seed, 123)
    policy = SoftmaxPolicy(n_states, n_actions, rng.standard_normal(n_states * n_actions))
    critic = rng.standard_normal(n_states * n_actions)
    return mdp, policy, critic


@pytest.fixture
def instance():
    return make_instance(0)


@pytest.fixture(params=[0.5, 0.9, 0.99], ids=lambda g: f"gamma{g}")
def gamma_instance(request):
    return make_instance(11, 4, 3, request.param)


@pytest.fixture(scope="session")
def fourroom():
    return fourroom_mdp()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance claim, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
