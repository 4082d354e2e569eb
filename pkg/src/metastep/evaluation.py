"""Shared rollout loop for step-size controllers and baseline optimizers.

Every controller (FQI greedy, fixed/decaying schedules, metagrad) drives the
same normalized natural-gradient loop; Adam and RMSprop update the parameters
directly from the vanilla gradient. Task sampling and rollout RNG streams are
keyed only by (master seed, task index, step), so all controllers evaluated
under one master seed see identical tasks, initial policies and rollout seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import family_config, make_env, sample_context
from .gradients import (
    CG_ITERS_DEFAULT,
    FISHER_DAMPING_DEFAULT,
    natural_gradient,
    nga_update,
    pgt_gradient,
)
from .metamdp import MetaState, initial_policy
from .rl import RngStream, estimate_return


@dataclass
class EpisodeResult:
    returns: np.ndarray  # (T + 1,) return estimate before and after each update
    stderrs: np.ndarray  # (T + 1,)
    step_sizes: np.ndarray  # (T,) meta-actions taken (empty for Adam/RMSprop)
    overshoot_frac: np.ndarray  # (T + 1,) fraction of rollouts ending at -100


@dataclass
class TaskResults:
    returns: np.ndarray  # (tasks, T + 1)
    stderrs: np.ndarray
    step_sizes: np.ndarray  # (tasks, T)
    overshoot_frac: np.ndarray  # (tasks, T + 1)

    def mean_curve(self) -> np.ndarray:
        return self.returns.mean(axis=0)

    def final_returns(self) -> np.ndarray:
        return self.returns[:, -1]


def _overshoot_fraction(trajectories) -> float:
    hits = sum(
        1 for t in trajectories if len(t) > 0 and t.rewards[-1] == -100.0
    )
    return hits / len(trajectories)


def run_stepsize_episode(
    env,
    params,
    T: int,
    n: int,
    gamma: float,
    rng: RngStream,
    select_h,
    cg_iters: int = CG_ITERS_DEFAULT,
    damping: float = FISHER_DAMPING_DEFAULT,
) -> EpisodeResult:
    """T normalized natural-gradient updates with step sizes from select_h.

    select_h(t, meta_state, grad) -> h is called before each update and may be
    stateful (schedules, metagrad traces).
    """
    j, stderr, trajs = estimate_return(env, params, n, gamma, rng.split(0))
    grad = natural_gradient(trajs, params, gamma, cg_iters=cg_iters, damping=damping)
    returns, stderrs, overshoots = [j], [stderr], [_overshoot_fraction(trajs)]
    step_sizes = []
    for t in range(T):
        x = MetaState(theta=params.theta, nat_grad=grad.vector, context=env.context)
        h = float(select_h(t, x, grad))
        step_sizes.append(h)
        params, _ = nga_update(params, h, grad)
        j, stderr, trajs = estimate_return(env, params, n, gamma, rng.split(t + 1))
        grad = natural_gradient(
            trajs, params, gamma, cg_iters=cg_iters, damping=damping
        )
        returns.append(j)
        stderrs.append(stderr)
        overshoots.append(_overshoot_fraction(trajs))
    return EpisodeResult(
        returns=np.array(returns),
        stderrs=np.array(stderrs),
        step_sizes=np.array(step_sizes),
        overshoot_frac=np.array(overshoots),
    )


def run_vanilla_optimizer_episode(
    env,
    params,
    T: int,
    n: int,
    gamma: float,
    rng: RngStream,
    state,
    update_fn,
) -> EpisodeResult:
    """T updates where update_fn(state, theta, grad) -> (state, theta) acts on
    the plain policy gradient (Adam / RMSprop ascent)."""
    j, stderr, trajs = estimate_return(env, params, n, gamma, rng.split(0))
    returns, stderrs, overshoots = [j], [stderr], [_overshoot_fraction(trajs)]
    for t in range(T):
        grad = pgt_gradient(trajs, params, gamma)
        state, theta = update_fn(state, params.theta, grad.vector)
        params = params.with_theta(theta)
        j, stderr, trajs = estimate_return(env, params, n, gamma, rng.split(t + 1))
        returns.append(j)
        stderrs.append(stderr)
        overshoots.append(_overshoot_fraction(trajs))
    return EpisodeResult(
        returns=np.array(returns),
        stderrs=np.array(stderrs),
        step_sizes=np.zeros(0),
        overshoot_frac=np.array(overshoots),
    )


def evaluate_tasks(
    family: str, episode_fn, n_tasks: int, rng: RngStream,
    fixed_context: np.ndarray | None = None,
) -> TaskResults:
    """Run episode_fn(env, params0, episode_rng) on n_tasks sampled tasks.

    Task draws depend only on (rng, task index): pairing across controllers."""
    results = []
    for i in range(n_tasks):
        if fixed_context is not None:
            context = np.asarray(fixed_context, dtype=float)
        else:
            context = sample_context(family, rng.split(i, 0))
        env = make_env(family, context)
        params = initial_policy(family, rng.split(i, 1))
        results.append(episode_fn(env, params, rng.split(i, 2)))
    return TaskResults(
        returns=np.stack([r.returns for r in results]),
        stderrs=np.stack([r.stderrs for r in results]),
        step_sizes=np.stack([r.step_sizes for r in results]),
        overshoot_frac=np.stack([r.overshoot_frac for r in results]),
    )


def evaluate_qpair(
    qpair,
    family: str,
    n_tasks: int,
    T: int,
    n: int,
    rng: RngStream,
    include_context: bool = True,
    cg_iters: int = CG_ITERS_DEFAULT,
    damping: float = FISHER_DAMPING_DEFAULT,
) -> TaskResults:
    from .fqi import greedy_action

    gamma = family_config(family).gamma

    def episode(env, params, episode_rng):
        def select_h(t, x, grad):
            return greedy_action(qpair, x)

        return run_stepsize_episode(
            env, params, T, n, gamma, episode_rng, select_h, cg_iters, damping
        )

    return evaluate_tasks(family, episode, n_tasks, rng)
