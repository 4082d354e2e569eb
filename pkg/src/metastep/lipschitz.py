"""Closed-form Lipschitz-constant calculators and an empirical check of the
context-continuity bound on the return, |j_w - j_w'| <= L_wQ * d(w, w'),
run on Nav2D where the moduli are known analytically (context enters only the
reward, 1-Lipschitz; transitions are context-free)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import make_env, sample_context
from .rl import PolicyParams, RngStream, estimate_return

NAV2D_CONTEXT_REWARD_MODULUS = 1.0  # triangle inequality on the goal distance
NAV2D_CONTEXT_TRANSITION_MODULUS = 0.0  # dynamics ignore the context


class ContractionError(ValueError):
    """Raised when gamma * L_P * (1 + L_pi) >= 1 (the fixed point diverges)."""


@dataclass(frozen=True)
class LipschitzConstants:
    l_p: float  # transition modulus in (s, a)
    l_r: float  # reward modulus in (s, a)
    l_pi: float  # policy modulus in s
    l_wp: float  # transition modulus in the context
    l_wr: float  # reward modulus in the context
    gamma: float
    m_theta: float = 0.0  # per-coordinate bound on the score
    l_grad_logpi: float = 0.0  # state-action modulus of the score

    def __post_init__(self):
        for name in ("l_p", "l_r", "l_pi", "l_wp", "l_wr", "m_theta", "l_grad_logpi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


def _check_contraction(c: LipschitzConstants) -> float:
    rate = c.gamma * c.l_p * (1.0 + c.l_pi)
    if rate >= 1.0:
        raise ContractionError(
            f"contraction condition gamma*L_P*(1+L_pi) < 1 violated (got {rate})"
        )
    return rate


def l_v_pi(c: LipschitzConstants) -> float:
    """State modulus of the value function: L_r(1+L_pi) / (1 - gamma L_P (1+L_pi))."""
    rate = _check_contraction(c)
    return c.l_r * (1.0 + c.l_pi) / (1.0 - rate)


def l_q_state_action(c: LipschitzConstants) -> float:
    """State-action modulus of Q: L_r / (1 - gamma L_P (1+L_pi))."""
    rate = _check_contraction(c)
    return c.l_r / (1.0 - rate)


def l_q_context(c: LipschitzConstants) -> float:
    """Context modulus of Q (and hence of the return):
    (L_wr + gamma L_wP L_V) / (1 - gamma)."""
    return (c.l_wr + c.gamma * c.l_wp * l_v_pi(c)) / (1.0 - c.gamma)


def l_delta(c: LipschitzConstants) -> float:
    """Context modulus of the discounted state-occupancy measure."""
    rate = _check_contraction(c)
    return c.gamma * c.l_wp / (1.0 - rate)


def l_eta(c: LipschitzConstants, r_max: float, l_q: float | None = None) -> float:
    """State-action modulus of score * Q:
    (R_max / (1 - gamma)) L_grad_logpi + M_theta * L_Q."""
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    if l_q is None:
        l_q = l_q_state_action(c)
    return r_max / (1.0 - c.gamma) * c.l_grad_logpi + c.m_theta * l_q


def l_grad_j(
    c: LipschitzConstants,
    l_eta_val: float,
    l_delta_val: float,
    l_q_context_val: float,
) -> float:
    """Context modulus of the return gradient:
    L_eta (1 + L_pi) L_delta + M_theta * L_wQ."""
    return l_eta_val * (1.0 + c.l_pi) * l_delta_val + c.m_theta * l_q_context_val


def nav2d_constants(gamma: float = 0.99) -> LipschitzConstants:
    return LipschitzConstants(
        l_p=1.0,  # next state moves with (s, a) 1-Lipschitz-ly, context-free
        l_r=1.0,
        l_pi=0.0,
        l_wp=NAV2D_CONTEXT_TRANSITION_MODULUS,
        l_wr=NAV2D_CONTEXT_REWARD_MODULUS,
        gamma=gamma,
    )


@dataclass
class BoundReport:
    pair_id: np.ndarray
    distance: np.ndarray
    delta_j: np.ndarray
    bound: np.ndarray
    slack: np.ndarray
    passed: np.ndarray

    @property
    def violations(self) -> int:
        return int((~self.passed).sum())


def verify_return_bound(
    policy: PolicyParams,
    n_pairs: int,
    n: int,
    rng: RngStream,
    family: str = "nav2d",
    stderr_slack: float = 4.0,
) -> BoundReport:
    """Check |j_w - j_w'| <= L_wQ ||w - w'|| + slack on random context pairs.

    Both returns in a pair use the same rollout stream (common random numbers),
    so with a deterministic policy (sigma = 0) the check has zero slack.
    """
    if family != "nav2d":
        raise ValueError("analytic constants are only available for nav2d")
    gamma = make_env("nav2d", np.zeros(2)).descriptor.gamma
    bound_const = l_q_context(nav2d_constants(gamma))
    pair_id = np.arange(n_pairs)
    distance = np.zeros(n_pairs)
    delta_j = np.zeros(n_pairs)
    bound = np.zeros(n_pairs)
    slack = np.zeros(n_pairs)
    for i in range(n_pairs):
        w1 = sample_context(family, rng.split(i, 0))
        w2 = sample_context(family, rng.split(i, 1))
        rollouts = rng.split(i, 2)
        j1, se1, _ = estimate_return(make_env(family, w1), policy, n, gamma, rollouts)
        j2, se2, _ = estimate_return(make_env(family, w2), policy, n, gamma, rollouts)
        distance[i] = np.linalg.norm(w1 - w2)
        delta_j[i] = abs(j1 - j2)
        slack[i] = stderr_slack * (se1 + se2)
        bound[i] = bound_const * distance[i] + slack[i]
    passed = delta_j <= bound
    return BoundReport(
        pair_id=pair_id,
        distance=distance,
        delta_j=delta_j,
        bound=bound,
        slack=slack,
        passed=passed,
    )
