"""Meta-MDP construction: meta-states, meta reward and dataset generation.

A meta-state concatenates the policy parameters, the natural-gradient estimate
at those parameters, and the task context. The meta-action is the step size of
one normalized natural-gradient update; the meta reward is the return gain of
that update.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .envs import family_config, make_env, sample_context
from .gradients import (
    CG_ITERS_DEFAULT,
    FISHER_DAMPING_DEFAULT,
    natural_gradient,
    nga_update,
)
from .rl import PolicyParams, RngStream, estimate_return


@dataclass(frozen=True)
class MetaState:
    theta: np.ndarray
    nat_grad: np.ndarray
    context: np.ndarray | None

    def features(self, include_context: bool = True) -> np.ndarray:
        parts = [self.theta, self.nat_grad]
        if include_context and self.context is not None:
            parts.append(self.context)
        return np.concatenate(parts)


@dataclass(frozen=True)
class MetaTransition:
    x: MetaState
    h: float
    l: float
    x_next: MetaState
    episode_id: int
    step_id: int
    j_before: float
    j_after: float


def meta_reward(j_before: float, j_after: float) -> float:
    if not (np.isfinite(j_before) and np.isfinite(j_after)):
        raise ValueError("return estimates must be finite")
    return j_after - j_before


def initial_policy(family: str, rng: RngStream | np.random.Generator) -> PolicyParams:
    """Draw initial policy parameters from the family's initialization law."""
    cfg = family_config(family)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    dim = cfg.action_dim * (cfg.state_dim + 1)
    if family == "nav2d" or family == "swingup":
        theta = np.sqrt(0.1) * gen.standard_normal(dim)
    elif family == "cartpole":
        theta = np.sqrt(0.01) * gen.standard_normal(dim)
    elif family == "minigolf":
        w = gen.uniform(-1.0, 2.0)
        b = gen.uniform(-2.0, 3.5)
        theta = np.array([b, w])  # bias-first layout
    else:
        raise ValueError(f"unknown family {family!r}")
    return PolicyParams(
        theta=theta,
        sigma=cfg.sigma,
        state_dim=cfg.state_dim,
        action_dim=cfg.action_dim,
    )


def _estimate(env, params, n, gamma, rng, cg_iters, damping):
    j, stderr, trajs = estimate_return(env, params, n, gamma, rng)
    grad = natural_gradient(trajs, params, gamma, cg_iters=cg_iters, damping=damping)
    return j, grad


def generate_dataset_trajectory(
    family: str,
    K: int,
    T: int,
    n: int,
    rng: RngStream,
    cg_iters: int = CG_ITERS_DEFAULT,
    damping: float = FISHER_DAMPING_DEFAULT,
    fixed_context: np.ndarray | None = None,
) -> list[MetaTransition]:
    """K meta-episodes of T chained updates with uniformly sampled step sizes."""
    if K < 1 or T < 1 or n < 1:
        raise ValueError("K, T and n must all be >= 1")
    cfg = family_config(family)
    h_lo, h_hi = cfg.h_range
    transitions = []
    for k in range(K):
        if fixed_context is not None:
            context = np.asarray(fixed_context, dtype=float)
        else:
            context = sample_context(family, rng.split(k, 0))
        env = make_env(family, context)
        params = initial_policy(family, rng.split(k, 1))
        h_gen = rng.split(k, 3).generator()
        j, grad = _estimate(
            env, params, n, cfg.gamma, rng.split(k, 2, 0), cg_iters, damping
        )
        for t in range(T):
            h = float(h_gen.uniform(h_lo, h_hi))
            x = MetaState(theta=params.theta, nat_grad=grad.vector, context=context)
            params, _ = nga_update(params, h, grad)
            j_next, grad = _estimate(
                env, params, n, cfg.gamma, rng.split(k, 2, t + 1), cg_iters, damping
            )
            x_next = MetaState(
                theta=params.theta, nat_grad=grad.vector, context=context
            )
            transitions.append(
                MetaTransition(
                    x=x,
                    h=h,
                    l=meta_reward(j, j_next),
                    x_next=x_next,
                    episode_id=k,
                    step_id=t,
                    j_before=j,
                    j_after=j_next,
                )
            )
            j = j_next
    return transitions


def generate_dataset_generative(
    family: str,
    K: int,
    n: int,
    rng: RngStream,
    cg_iters: int = CG_ITERS_DEFAULT,
    damping: float = FISHER_DAMPING_DEFAULT,
    fixed_context: np.ndarray | None = None,
) -> list[MetaTransition]:
    """K independent transitions; context, initial policy and step size are all
    freshly sampled for each tuple (no chaining)."""
    if K < 1 or n < 1:
        raise ValueError("K and n must be >= 1")
    cfg = family_config(family)
    h_lo, h_hi = cfg.h_range
    transitions = []
    for k in range(K):
        if fixed_context is not None:
            context = np.asarray(fixed_context, dtype=float)
        else:
            context = sample_context(family, rng.split(k, 0))
        env = make_env(family, context)
        params = initial_policy(family, rng.split(k, 1))
        h = float(rng.split(k, 3).generator().uniform(h_lo, h_hi))
        j, grad = _estimate(
            env, params, n, cfg.gamma, rng.split(k, 2, 0), cg_iters, damping
        )
        x = MetaState(theta=params.theta, nat_grad=grad.vector, context=context)
        params, _ = nga_update(params, h, grad)
        j_next, grad_next = _estimate(
            env, params, n, cfg.gamma, rng.split(k, 2, 1), cg_iters, damping
        )
        x_next = MetaState(
            theta=params.theta, nat_grad=grad_next.vector, context=context
        )
        transitions.append(
            MetaTransition(
                x=x,
                h=h,
                l=meta_reward(j, j_next),
                x_next=x_next,
                episode_id=k,
                step_id=0,
                j_before=j,
                j_after=j_next,
            )
        )
    return transitions


def transitions_to_arrays(
    transitions: list[MetaTransition], include_context: bool = True
):
    """Stack transitions into (X, h, l, X_next) regression arrays."""
    X = np.stack([t.x.features(include_context) for t in transitions])
    X_next = np.stack([t.x_next.features(include_context) for t in transitions])
    h = np.array([t.h for t in transitions])
    l = np.array([t.l for t in transitions])
    return X, h, l, X_next


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_transitions_csv(path, transitions: list[MetaTransition]) -> None:
    """CSV persistence; floats use 17 significant digits for exact round-trip."""
    first = transitions[0]
    theta_dim = len(first.x.theta)
    ctx_dim = 0 if first.x.context is None else len(first.x.context)
    header = ["episode_id", "step_id"]
    header += [f"theta_{i}" for i in range(theta_dim)]
    header += [f"grad_{i}" for i in range(theta_dim)]
    header += [f"omega_{i}" for i in range(ctx_dim)]
    header += ["h", "l"]
    header += [f"next_theta_{i}" for i in range(theta_dim)]
    header += [f"next_grad_{i}" for i in range(theta_dim)]
    header += [f"next_omega_{i}" for i in range(ctx_dim)]
    header += ["j_before", "j_after"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in transitions:
            row = [str(t.episode_id), str(t.step_id)]
            row += [_fmt(v) for v in t.x.theta]
            row += [_fmt(v) for v in t.x.nat_grad]
            if ctx_dim:
                row += [_fmt(v) for v in t.x.context]
            row += [_fmt(t.h), _fmt(t.l)]
            row += [_fmt(v) for v in t.x_next.theta]
            row += [_fmt(v) for v in t.x_next.nat_grad]
            if ctx_dim:
                row += [_fmt(v) for v in t.x_next.context]
            row += [_fmt(t.j_before), _fmt(t.j_after)]
            writer.writerow(row)


def read_transitions_csv(path) -> list[MetaTransition]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        theta_dim = sum(1 for c in header if c.startswith("theta_"))
        ctx_dim = sum(1 for c in header if c.startswith("omega_"))
        transitions = []
        for row in reader:
            vals = row
            pos = 0
            episode_id, step_id = int(vals[0]), int(vals[1])
            pos = 2
            theta = np.array([float(v) for v in vals[pos : pos + theta_dim]])
            pos += theta_dim
            grad = np.array([float(v) for v in vals[pos : pos + theta_dim]])
            pos += theta_dim
            ctx = (
                np.array([float(v) for v in vals[pos : pos + ctx_dim]])
                if ctx_dim
                else None
            )
            pos += ctx_dim
            h, l = float(vals[pos]), float(vals[pos + 1])
            pos += 2
            next_theta = np.array([float(v) for v in vals[pos : pos + theta_dim]])
            pos += theta_dim
            next_grad = np.array([float(v) for v in vals[pos : pos + theta_dim]])
            pos += theta_dim
            next_ctx = (
                np.array([float(v) for v in vals[pos : pos + ctx_dim]])
                if ctx_dim
                else None
            )
            pos += ctx_dim
            j_before, j_after = float(vals[pos]), float(vals[pos + 1])
            transitions.append(
                MetaTransition(
                    x=MetaState(theta, grad, ctx),
                    h=h,
                    l=l,
                    x_next=MetaState(next_theta, next_grad, next_ctx),
                    episode_id=episode_id,
                    step_id=step_id,
                    j_before=j_before,
                    j_after=j_after,
                )
            )
    return transitions
