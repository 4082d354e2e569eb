"""Gaussian linear policies, trajectory sampling and Monte-Carlo return estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MdpDescriptor:
    state_dim: int
    action_dim: int
    horizon: int
    gamma: float
    reward_bound: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be >= 1")
        if self.reward_bound < 0:
            raise ValueError("reward_bound must be >= 0")


@dataclass(frozen=True)
class RngStream:
    """Splittable random stream keyed by (master seed, nested stream ids).

    Identical (seed, stream_id) pairs reproduce identical draws; distinct
    stream ids yield statistically independent generators.
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def split(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class PolicyParams:
    """Gaussian linear policy N(theta_0 + theta^T s, sigma^2) per action dim.

    theta is flat, bias-first per action dimension:
    [b_0, w_0_1..w_0_S, b_1, w_1_1..w_1_S, ...].
    """

    theta: np.ndarray
    sigma: float
    state_dim: int
    action_dim: int = 1

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        expected = self.action_dim * (self.state_dim + 1)
        if theta.shape != (expected,):
            raise ValueError(
                f"theta must have length {expected}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")

    @property
    def weights(self) -> np.ndarray:
        """(action_dim, state_dim + 1) view, column 0 is the bias."""
        return self.theta.reshape(self.action_dim, self.state_dim + 1)

    def with_theta(self, theta: np.ndarray) -> "PolicyParams":
        return PolicyParams(theta, self.sigma, self.state_dim, self.action_dim)


@dataclass
class Trajectory:
    states: np.ndarray  # (T, state_dim)
    actions: np.ndarray  # (T, action_dim)
    rewards: np.ndarray  # (T,)
    truncated: bool  # True when cut by the horizon rather than a terminal state

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def steps(self):
        return list(zip(self.states, self.actions, self.rewards))


def policy_mean(params: PolicyParams, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != params.state_dim:
        raise ValueError(
            f"state has dimension {state.shape[-1]}, expected {params.state_dim}"
        )
    w = params.weights
    return w[:, 0] + state @ w[:, 1:].T


def policy_sample(
    params: PolicyParams, state: np.ndarray, rng: RngStream | np.random.Generator
) -> np.ndarray:
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    mean = policy_mean(params, state)
    return mean + params.sigma * gen.standard_normal(mean.shape)


def log_policy_gradient(
    params: PolicyParams, state: np.ndarray, action: np.ndarray
) -> np.ndarray:
    """Score of the Gaussian log-density in theta, laid out like theta."""
    state = np.asarray(state, dtype=float)
    action = np.asarray(action, dtype=float)
    mean = policy_mean(params, state)
    # per action dim d: ((a_d - mean_d) / sigma^2) * [1, s]
    coeff = (action - mean) / params.sigma**2  # (action_dim,)
    feats = np.concatenate(([1.0], state))  # (state_dim + 1,)
    return (coeff[:, None] * feats[None, :]).ravel()


def batch_log_policy_gradients(
    params: PolicyParams, states: np.ndarray, actions: np.ndarray
) -> np.ndarray:
    """Scores for a stack of (state, action) pairs; rows match theta layout."""
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    means = policy_mean(params, states)
    coeff = (actions - means) / params.sigma**2  # (n, action_dim)
    feats = np.concatenate(
        [np.ones((len(states), 1)), states], axis=1
    )  # (n, state_dim + 1)
    return (coeff[:, :, None] * feats[:, None, :]).reshape(len(states), -1)


def trajectory_return(traj: Trajectory, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rewards = np.asarray(traj.rewards, dtype=float)
    if len(rewards) == 0:
        return 0.0
    discounts = gamma ** np.arange(len(rewards))
    return float(discounts @ rewards)


def sample_trajectories(env, params: PolicyParams, n: int, rng: RngStream) -> list[Trajectory]:
    """Roll out n episodes under the policy, stepping all episodes in lockstep."""
    if n < 1:
        raise ValueError("batch size must be >= 1")
    gen = rng.generator()
    desc = env.descriptor
    horizon = desc.horizon
    states = env.initial_states(n, gen)
    all_states = np.zeros((n, horizon, desc.state_dim))
    all_actions = np.zeros((n, horizon, desc.action_dim))
    all_rewards = np.zeros((n, horizon))
    lengths = np.zeros(n, dtype=int)
    terminated = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for t in range(horizon):
        if not active.any():
            break
        means = policy_mean(params, states)
        actions = means + params.sigma * gen.standard_normal(means.shape)
        next_states, rewards, done = env.step_batch(states, actions, gen)
        idx = np.flatnonzero(active)
        all_states[idx, t] = states[idx]
        all_actions[idx, t] = actions[idx]
        all_rewards[idx, t] = rewards[idx]
        lengths[idx] = t + 1
        terminated[idx] |= done[idx]
        # freeze rows that already finished so terminal states are not re-stepped
        states = np.where(active[:, None], next_states, states)
        active &= ~done
    trajectories = []
    for i in range(n):
        m = lengths[i]
        trajectories.append(
            Trajectory(
                states=all_states[i, :m].copy(),
                actions=all_actions[i, :m].copy(),
                rewards=all_rewards[i, :m].copy(),
                truncated=not terminated[i],
            )
        )
    return trajectories


def estimate_return(
    env, params: PolicyParams, n: int, gamma: float, rng: RngStream
) -> tuple[float, float, list[Trajectory]]:
    """Monte-Carlo return estimate over n fresh rollouts.

    The trajectories are returned so the same batch can feed the gradient
    estimator: one sampling pass per policy serves both the return and the
    gradient.
    """
    trajectories = sample_trajectories(env, params, n, rng)
    returns = np.array([trajectory_return(t, gamma) for t in trajectories])
    mean = float(returns.mean())
    stderr = float(returns.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, stderr, trajectories
