import numpy as np
import pytest

from metastep.rl import MdpDescriptor, PolicyParams, RngStream


class LinearToyEnv:
    """Deterministic chain: s' = s + a, reward r = a, no termination.

    The return expectation is linear in the sampled actions, which makes the
    paired-seed finite-difference return gradient noiseless enough to serve as
    an oracle for the likelihood-ratio estimate.
    """

    def __init__(self, horizon=2, gamma=0.9):
        self.descriptor = MdpDescriptor(
            state_dim=1, action_dim=1, horizon=horizon, gamma=gamma, reward_bound=10.0
        )
        self.context = np.zeros(0)

    def initial_states(self, n, gen):
        return np.zeros((n, 1))

    def step_batch(self, states, actions, gen):
        next_states = states + actions
        rewards = actions[:, 0].copy()
        done = np.zeros(len(states), dtype=bool)
        return next_states, rewards, done


class BanditEnv:
    """One-step environment with reward equal to the action."""

    def __init__(self):
        self.descriptor = MdpDescriptor(
            state_dim=1, action_dim=1, horizon=1, gamma=1.0, reward_bound=10.0
        )
        self.context = np.zeros(0)

    def initial_states(self, n, gen):
        return np.zeros((n, 1))

    def step_batch(self, states, actions, gen):
        return states, actions[:, 0].copy(), np.ones(len(states), dtype=bool)


@pytest.fixture
def toy_policy():
    return PolicyParams(theta=np.array([0.3, 0.5]), sigma=0.5, state_dim=1)


@pytest.fixture
def rng():
    return RngStream(1234, ())
