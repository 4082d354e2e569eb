"""Fitted Q-iteration over meta-transitions with a double clipped target.

Two independently seeded forests approximate the meta action-value function;
Bellman targets combine them as lam * min + (1 - lam) * max, and the greedy
step size is the argmax over a 101-point action grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .extratrees import Forest, TreeParams, fit_forest, predict_batch
from .metamdp import MetaState, MetaTransition, transitions_to_arrays

ACTION_GRID_SIZE = 101
LAMBDA_DEFAULT = 0.75


def make_action_grid(h_lo: float, h_hi: float, size: int = ACTION_GRID_SIZE) -> np.ndarray:
    if not h_hi > h_lo:
        raise ValueError("action interval must be nondegenerate")
    return np.linspace(h_lo, h_hi, size)


@dataclass(frozen=True)
class QPair:
    q1: Forest
    q2: Forest
    lam: float
    action_grid: np.ndarray
    iteration: int

    def __post_init__(self):
        if not 0.5 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0.5, 1]")
        grid = np.asarray(self.action_grid, dtype=float)
        if len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("action grid must be strictly increasing")
        object.__setattr__(self, "action_grid", grid)


@dataclass
class FqiRun:
    models: list[QPair]
    meta_gamma: float
    training_log: list[dict] = field(default_factory=list)


def _features_of(x, expected_dim: int) -> np.ndarray:
    if isinstance(x, MetaState):
        feats = x.features(True)
        if len(feats) != expected_dim:
            # context-ablated model: drop omega from the features
            feats = x.features(False)
        return feats
    return np.asarray(x, dtype=float)


def clipped_values_batch(qpair: QPair, inputs: np.ndarray) -> np.ndarray:
    """Clipped combination on pre-built (x, h) input rows."""
    v1 = predict_batch(qpair.q1, inputs)
    v2 = predict_batch(qpair.q2, inputs)
    return qpair.lam * np.minimum(v1, v2) + (1.0 - qpair.lam) * np.maximum(v1, v2)


def clipped_value(qpair: QPair, x, h: float) -> float:
    feats = np.concatenate([_features_of(x, qpair.q1.feature_dim - 1), [h]])
    return float(clipped_values_batch(qpair, feats[None, :])[0])


def grid_values(qpair: QPair, x) -> np.ndarray:
    """Clipped value at every grid step size for one meta-state."""
    feats = _features_of(x, qpair.q1.feature_dim - 1)
    grid = qpair.action_grid
    inputs = np.concatenate(
        [np.repeat(feats[None, :], len(grid), axis=0), grid[:, None]], axis=1
    )
    return clipped_values_batch(qpair, inputs)


def greedy_action(qpair: QPair, x) -> float:
    """Argmax of the clipped value over the grid; ties go to the smaller h."""
    values = grid_values(qpair, x)
    return float(qpair.action_grid[int(np.argmax(values))])


def bellman_targets(
    dataset: list[MetaTransition],
    qpair_prev: QPair | None,
    meta_gamma: float,
    include_context: bool = True,
) -> np.ndarray:
    """o = l + meta_gamma * max_h clipped(x', h); first iteration uses o = l."""
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    _, _, l, X_next = transitions_to_arrays(dataset, include_context)
    if qpair_prev is None or meta_gamma == 0.0:
        return l.copy()
    grid = qpair_prev.action_grid
    n, d = X_next.shape
    g = len(grid)
    inputs = np.empty((n * g, d + 1))
    inputs[:, :d] = np.repeat(X_next, g, axis=0)
    inputs[:, d] = np.tile(grid, n)
    values = clipped_values_batch(qpair_prev, inputs).reshape(n, g)
    return l + meta_gamma * values.max(axis=1)


def fqi_train(
    dataset: list[MetaTransition],
    iterations: int,
    meta_gamma: float,
    lam: float,
    tree_params: TreeParams,
    action_grid: np.ndarray,
    seed: int,
    include_context: bool = True,
    single_q: bool = False,
) -> FqiRun:
    """Iterate target regression; every iteration's QPair is kept.

    With single_q=True the second forest is the first one (clipping becomes
    the identity), for the single-Q ablation.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    X, h, _, _ = transitions_to_arrays(dataset, include_context)
    inputs = np.concatenate([X, h[:, None]], axis=1)
    run = FqiRun(models=[], meta_gamma=meta_gamma)
    prev: QPair | None = None
    for it in range(1, iterations + 1):
        targets = bellman_targets(dataset, prev, meta_gamma, include_context)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(it,))
        seed1, seed2 = [int(s.generate_state(1)[0]) for s in seq.spawn(2)]
        q1 = fit_forest(inputs, targets, tree_params, seed=seed1)
        q2 = q1 if single_q else fit_forest(inputs, targets, tree_params, seed=seed2)
        prev = QPair(q1=q1, q2=q2, lam=lam, action_grid=action_grid, iteration=it)
        run.models.append(prev)
        run.training_log.append(
            {
                "iteration": it,
                "target_min": float(targets.min()),
                "target_max": float(targets.max()),
                "target_mean": float(targets.mean()),
                "target_std": float(targets.std()),
            }
        )
    return run


def select_model(
    run: FqiRun,
    family: str,
    n_val_tasks: int,
    T: int,
    n: int,
    rng,
    include_context: bool = True,
    cg_iters: int | None = None,
    damping: float | None = None,
):
    """Evaluate every iteration on the same validation tasks and seeds; pick
    the iteration with the best mean final return (ties to the earlier one)."""
    from .evaluation import evaluate_qpair

    if n_val_tasks < 1:
        raise ValueError("n_val_tasks must be >= 1")
    kwargs = {}
    if cg_iters is not None:
        kwargs["cg_iters"] = cg_iters
    if damping is not None:
        kwargs["damping"] = damping
    means = []
    for qpair in run.models:
        result = evaluate_qpair(
            qpair, family, n_val_tasks, T, n, rng, include_context, **kwargs
        )
        means.append(float(result.returns[:, -1].mean()))
    best = int(np.argmax(means)) + 1
    return best, means


def evaluate_policy(
    qpair: QPair,
    family: str,
    n_test_tasks: int,
    T: int,
    n: int,
    rng,
    include_context: bool = True,
    cg_iters: int | None = None,
    damping: float | None = None,
):
    """Greedy step-size controller rollout on fresh test tasks; see
    evaluation.TaskResults for the curve layout."""
    from .evaluation import evaluate_qpair

    kwargs = {}
    if cg_iters is not None:
        kwargs["cg_iters"] = cg_iters
    if damping is not None:
        kwargs["damping"] = damping
    return evaluate_qpair(
        qpair, family, n_test_tasks, T, n, rng, include_context, **kwargs
    )
