"""Policy gradient estimation, Fisher-vector products, conjugate gradient and
the normalized natural-gradient-ascent update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rl import PolicyParams, Trajectory, batch_log_policy_gradients

CG_ITERS_DEFAULT = 10
CG_TOL_DEFAULT = 1e-10
FISHER_DAMPING_DEFAULT = 1e-3


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    batch_size: int
    norm: float
    degenerate: bool = False  # zero gradient with zero Fisher


def pgt_gradient(
    trajectories: list[Trajectory],
    params: PolicyParams,
    gamma: float,
    baseline: bool = False,
) -> GradientEstimate:
    """GPOMDP estimate: mean over trajectories of
    sum_t (sum_{t' <= t} score(a_t', s_t')) * gamma^t r_t.

    With baseline=True the per-step discounted reward is centered by its
    batch mean at each time index.
    """
    if len(trajectories) == 0:
        raise ValueError("empty trajectory batch")
    dim = params.theta.shape[0]
    n = len(trajectories)
    max_len = max(len(t) for t in trajectories)
    disc_rewards = np.zeros((n, max_len))
    cum_scores = np.zeros((n, max_len, dim))
    for i, traj in enumerate(trajectories):
        m = len(traj)
        if m == 0:
            continue
        scores = batch_log_policy_gradients(params, traj.states, traj.actions)
        cum_scores[i, :m] = np.cumsum(scores, axis=0)
        disc_rewards[i, :m] = gamma ** np.arange(m) * traj.rewards
    if baseline:
        alive = np.zeros((n, max_len))
        for i, traj in enumerate(trajectories):
            alive[i, : len(traj)] = 1.0
        counts = np.maximum(alive.sum(axis=0), 1.0)
        means = disc_rewards.sum(axis=0) / counts
        disc_rewards = (disc_rewards - means[None, :]) * alive
    grad = np.einsum("ntd,nt->d", cum_scores, disc_rewards) / n
    return GradientEstimate(vector=grad, batch_size=n, norm=float(np.linalg.norm(grad)))


def _score_matrix(trajectories: list[Trajectory], params: PolicyParams) -> np.ndarray:
    rows = [
        batch_log_policy_gradients(params, t.states, t.actions)
        for t in trajectories
        if len(t) > 0
    ]
    if not rows:
        raise ValueError("no state-action pairs in batch")
    return np.concatenate(rows, axis=0)


def fisher_vector_product(
    trajectories: list[Trajectory],
    params: PolicyParams,
    v: np.ndarray,
    damping: float = FISHER_DAMPING_DEFAULT,
) -> np.ndarray:
    """(F_hat + damping*I) v, matrix-free over all state-action pairs."""
    scores = _score_matrix(trajectories, params)
    return scores.T @ (scores @ v) / len(scores) + damping * v


def conjugate_gradient(apply_A, b, max_iters: int, tol: float) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A given x -> A x."""
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = r @ r
    b_norm = np.sqrt(rs)
    if b_norm == 0.0:
        return x
    for _ in range(max_iters):
        if np.sqrt(rs) <= tol * b_norm:
            break
        Ap = apply_A(p)
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0:
            raise FloatingPointError("conjugate gradient: operator not SPD on iterate")
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def natural_gradient(
    trajectories: list[Trajectory],
    params: PolicyParams,
    gamma: float,
    cg_iters: int = CG_ITERS_DEFAULT,
    damping: float = FISHER_DAMPING_DEFAULT,
    cg_tol: float = CG_TOL_DEFAULT,
    baseline: bool = False,
) -> GradientEstimate:
    """Solve F_hat g = grad_hat j with conjugate gradient over Fisher-vector
    products; the same batch serves both estimates."""
    grad = pgt_gradient(trajectories, params, gamma, baseline=baseline)
    if grad.norm == 0.0:
        return GradientEstimate(
            vector=np.zeros_like(grad.vector),
            batch_size=grad.batch_size,
            norm=0.0,
            degenerate=True,
        )
    scores = _score_matrix(trajectories, params)
    n_pairs = len(scores)

    def apply_fisher(v):
        return scores.T @ (scores @ v) / n_pairs + damping * v

    g = conjugate_gradient(apply_fisher, grad.vector, cg_iters, cg_tol)
    return GradientEstimate(
        vector=g, batch_size=grad.batch_size, norm=float(np.linalg.norm(g))
    )


def nga_update(params: PolicyParams, h: float, grad: GradientEstimate | np.ndarray):
    """theta' = theta + h * g / ||g||; no-op (with flag) when g = 0.

    Returns (new_params, moved) where moved is False for the guarded no-op.
    """
    if h < 0:
        raise ValueError("step size must be >= 0")
    vec = grad.vector if isinstance(grad, GradientEstimate) else np.asarray(grad, float)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return params, False
    return params.with_theta(params.theta + h * vec / norm), True
