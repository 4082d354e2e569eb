"""Baseline step-size rules: fixed, decaying schedules, Adam, RMSprop and the
metagrad adapter, all driving the shared evaluation loop."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .envs import family_config
from .evaluation import (
    TaskResults,
    evaluate_tasks,
    run_stepsize_episode,
    run_vanilla_optimizer_episode,
)
from .rl import RngStream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7
RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-7


def fixed_step(alpha: float, t: int) -> float:
    return alpha


def decay_step(alpha: float, t: int) -> float:
    """h_t = alpha / t; t counts updates starting at 1."""
    if t < 1:
        raise ValueError("decay schedule is defined for t >= 1")
    return alpha / t


def exp_decay_step(alpha: float, h0: float, t: int) -> float:
    """Exponential schedule h_t = h0 * alpha^t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return h0 * alpha**t


@dataclass
class AdamState:
    alpha: float
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(alpha: float, dim: int) -> AdamState:
    return AdamState(alpha=alpha, m=np.zeros(dim), v=np.zeros(dim))


def adam_update(state: AdamState, theta: np.ndarray, grad: np.ndarray):
    """Canonical Adam with bias correction, ascent orientation."""
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad**2
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    theta_new = theta + state.alpha * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return AdamState(alpha=state.alpha, m=m, v=v, t=t), theta_new


@dataclass
class RmspropState:
    alpha: float
    sq_avg: np.ndarray


def rmsprop_init(alpha: float, dim: int) -> RmspropState:
    return RmspropState(alpha=alpha, sq_avg=np.zeros(dim))


def rmsprop_update(state: RmspropState, theta: np.ndarray, grad: np.ndarray):
    """RMSprop ascent: v <- rho v + (1 - rho) g^2; step alpha g / (sqrt(v) + eps)."""
    sq_avg = RMSPROP_RHO * state.sq_avg + (1.0 - RMSPROP_RHO) * grad**2
    theta_new = theta + state.alpha * grad / (np.sqrt(sq_avg) + RMSPROP_EPS)
    return RmspropState(alpha=state.alpha, sq_avg=sq_avg), theta_new


@dataclass
class MetagradState:
    h: float
    beta: float
    mu: float
    z: np.ndarray
    flip_sign: bool = False  # experimental switch: +beta instead of the stated -beta


def metagrad_init(h0: float, beta: float, mu: float, dim: int, flip_sign=False) -> MetagradState:
    return MetagradState(h=h0, beta=beta, mu=mu, z=np.zeros(dim), flip_sign=flip_sign)


def metagrad_update(
    state: MetagradState, grad_prev_unit: np.ndarray, grad_new_unit: np.ndarray
) -> MetagradState:
    """z' = mu z + g_prev/|g_prev|; h' = h - beta (g_new/|g_new|) . z', clipped at 0.

    Both gradients must be nonzero (callers skip the update otherwise). The
    minus sign follows the stated recursion; flip_sign switches it.
    """
    z_new = state.mu * state.z + grad_prev_unit
    sim = float(grad_new_unit @ z_new)
    delta = state.beta * sim
    h_new = state.h + delta if state.flip_sign else state.h - delta
    return replace(state, h=max(h_new, 0.0), z=z_new)


def _unit(v: np.ndarray) -> np.ndarray | None:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return None
    return v / norm


def evaluate_baseline(
    kind: str,
    family: str,
    alpha: float,
    n_tasks: int,
    T: int,
    n: int,
    rng: RngStream,
    metagrad_beta: float = 0.001,
    metagrad_mu: float = 0.0,
    metagrad_flip_sign: bool = False,
    cg_iters: int | None = None,
    damping: float | None = None,
) -> TaskResults:
    """Run one baseline over n_tasks paired test tasks.

    kind: fixed | decay | expdecay | adam | rmsprop | metagrad. alpha is the
    fixed step, the schedule's initial rate, or the optimizer learning rate;
    for metagrad it is the initial step size h0.
    """
    cfg = family_config(family)
    gamma = cfg.gamma
    extra = {}
    if cg_iters is not None:
        extra["cg_iters"] = cg_iters
    if damping is not None:
        extra["damping"] = damping

    if kind in ("fixed", "decay", "expdecay"):

        def episode(env, params, episode_rng):
            if kind == "fixed":
                select = lambda t, x, g: fixed_step(alpha, t)
            elif kind == "decay":
                select = lambda t, x, g: decay_step(alpha, t + 1)
            else:
                select = lambda t, x, g: exp_decay_step(0.5, alpha, t)
            return run_stepsize_episode(
                env, params, T, n, gamma, episode_rng, select, **extra
            )

    elif kind == "metagrad":

        def episode(env, params, episode_rng):
            dim = len(params.theta)
            state = metagrad_init(
                alpha, metagrad_beta, metagrad_mu, dim, metagrad_flip_sign
            )
            prev_unit = [None]

            def select(t, x, grad):
                unit = _unit(grad.vector)
                if t > 0 and unit is not None and prev_unit[0] is not None:
                    new_state = metagrad_update(state, prev_unit[0], unit)
                    state.h, state.z = new_state.h, new_state.z
                if unit is not None:
                    prev_unit[0] = unit
                return state.h

            return run_stepsize_episode(
                env, params, T, n, gamma, episode_rng, select, **extra
            )

    elif kind in ("adam", "rmsprop"):

        def episode(env, params, episode_rng):
            dim = len(params.theta)
            if kind == "adam":
                state, update = adam_init(alpha, dim), adam_update
            else:
                state, update = rmsprop_init(alpha, dim), rmsprop_update
            return run_vanilla_optimizer_episode(
                env, params, T, n, gamma, episode_rng, state, update
            )

    else:
        raise ValueError(f"unknown baseline kind {kind!r}")

    return evaluate_tasks(family, episode, n_tasks, rng)
