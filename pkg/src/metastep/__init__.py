"""Adaptive step-size selection for natural policy gradient ascent.

A step-size controller is trained offline with fitted Q-iteration over an
extremely-randomized-trees regressor, on transitions collected from policy
updates across a family of contextual MDPs. Baseline optimizers and a
Lipschitz-bound laboratory share the same rollout machinery.
"""

__version__ = "0.1.0"

from .rl import (
    MdpDescriptor,
    PolicyParams,
    Trajectory,
    RngStream,
    policy_mean,
    policy_sample,
    log_policy_gradient,
    trajectory_return,
    estimate_return,
)
from .gradients import (
    GradientEstimate,
    pgt_gradient,
    fisher_vector_product,
    conjugate_gradient,
    natural_gradient,
    nga_update,
)
from .extratrees import TreeParams, Forest, fit_forest
from .fqi import QPair, FqiRun, fqi_train

__all__ = [
    "MdpDescriptor",
    "PolicyParams",
    "Trajectory",
    "RngStream",
    "policy_mean",
    "policy_sample",
    "log_policy_gradient",
    "trajectory_return",
    "estimate_return",
    "GradientEstimate",
    "pgt_gradient",
    "fisher_vector_product",
    "conjugate_gradient",
    "natural_gradient",
    "nga_update",
    "TreeParams",
    "Forest",
    "fit_forest",
    "QPair",
    "FqiRun",
    "fqi_train",
]
