"""Extremely randomized regression trees, built from scratch.

Each tree draws candidate split features without replacement, one uniform
threshold per candidate inside that feature's node range, and keeps the split
with the largest variance reduction. Leaves predict the mean target of their
training rows; the forest averages over trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

FORMAT_VERSION = 1


@dataclass(frozen=True)
class TreeParams:
    n_trees: int = 50
    min_split_fraction: float = 0.01
    k_features: int | None = None  # None = all features
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.min_split_fraction <= 1.0:
            raise ValueError("min_split_fraction must lie in (0, 1]")
        if self.k_features is not None and self.k_features < 1:
            raise ValueError("k_features must be >= 1")


@dataclass
class Forest:
    """Flat array encoding of all trees; children are absolute node indices.

    feature < 0 marks a leaf, whose value is the mean training target.
    """

    features: np.ndarray  # (nodes,) int64
    thresholds: np.ndarray  # (nodes,) float64
    lefts: np.ndarray  # (nodes,) int64
    rights: np.ndarray  # (nodes,) int64
    values: np.ndarray  # (nodes,) float64
    roots: np.ndarray  # (n_trees,) int64
    feature_dim: int
    train_size: int

    @property
    def n_trees(self) -> int:
        return len(self.roots)


class _Builder:
    def __init__(self, X, y, n_min, k_features):
        self.X = X
        self.y = y
        self.n_min = n_min
        self.k = k_features
        self.features = []
        self.thresholds = []
        self.lefts = []
        self.rights = []
        self.values = []

    def _add_node(self):
        self.features.append(-1)
        self.thresholds.append(0.0)
        self.lefts.append(-1)
        self.rights.append(-1)
        self.values.append(0.0)
        return len(self.features) - 1

    def build(self, rows, gen):
        node = self._add_node()
        y_node = self.y[rows]
        m = len(rows)
        if m < self.n_min or np.all(y_node == y_node[0]):
            self.values[node] = float(y_node.mean())
            return node
        X_node = self.X[rows]
        d = X_node.shape[1]
        cand = gen.permutation(d)[: self.k].astype(np.int64)
        lo = X_node[:, cand].min(axis=0)
        hi = X_node[:, cand].max(axis=0)
        # draw one threshold per candidate in fixed order for determinism;
        # constant-feature candidates stay invalid
        thr = gen.uniform(lo, hi)
        valid = hi > lo
        if not valid.any():
            self.values[node] = float(y_node.mean())
            return node
        gains = _kernels.split_gains(X_node, y_node, cand, thr)
        gains = np.where(valid, gains, -np.inf)
        best = int(np.argmax(gains))  # ties break toward the lowest candidate index
        if not np.isfinite(gains[best]):
            self.values[node] = float(y_node.mean())
            return node
        f, t = int(cand[best]), float(thr[best])
        left_mask = self.X[rows, f] < t
        self.features[node] = f
        self.thresholds[node] = t
        self.lefts[node] = self.build(rows[left_mask], gen)
        self.rights[node] = self.build(rows[~left_mask], gen)
        return node


def fit_forest(
    X: np.ndarray, y: np.ndarray, params: TreeParams, seed: int | None = None
) -> Forest:
    """Fit an extra-trees regression forest; pure function of (X, y, params, seed)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("X must be a nonempty 2-d matrix")
    if y.shape != (len(X),):
        raise ValueError("y length must match X rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    if seed is None:
        seed = params.seed
    n, d = X.shape
    n_min = max(2, math.ceil(params.min_split_fraction * n))
    k = d if params.k_features is None else min(params.k_features, d)
    builder = _Builder(X, y, n_min, k)
    roots = []
    for tree_idx in range(params.n_trees):
        gen = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(tree_idx,))
        )
        roots.append(builder.build(np.arange(n), gen))
    return Forest(
        features=np.array(builder.features, dtype=np.int64),
        thresholds=np.array(builder.thresholds, dtype=np.float64),
        lefts=np.array(builder.lefts, dtype=np.int64),
        rights=np.array(builder.rights, dtype=np.int64),
        values=np.array(builder.values, dtype=np.float64),
        roots=np.array(roots, dtype=np.int64),
        feature_dim=d,
        train_size=n,
    )


def predict_batch(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    if X.shape[1] != forest.feature_dim:
        raise ValueError(
            f"expected {forest.feature_dim} features, got {X.shape[1]}"
        )
    if len(X) == 0:
        return np.zeros(0)
    return _kernels.predict_forest(
        forest.features,
        forest.thresholds,
        forest.lefts,
        forest.rights,
        forest.values,
        forest.roots,
        X,
    )


def predict(forest: Forest, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.feature_dim,):
        raise ValueError(f"expected a vector of length {forest.feature_dim}")
    return float(predict_batch(forest, x[None, :])[0])


def save_forest(forest: Forest, path) -> None:
    np.savez(
        path,
        format_version=np.array([FORMAT_VERSION]),
        features=forest.features,
        thresholds=forest.thresholds,
        lefts=forest.lefts,
        rights=forest.rights,
        values=forest.values,
        roots=forest.roots,
        feature_dim=np.array([forest.feature_dim]),
        train_size=np.array([forest.train_size]),
    )


def load_forest(path) -> Forest:
    data = np.load(path)
    version = int(data["format_version"][0])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported forest format version {version}")
    return Forest(
        features=data["features"],
        thresholds=data["thresholds"],
        lefts=data["lefts"],
        rights=data["rights"],
        values=data["values"],
        roots=data["roots"],
        feature_dim=int(data["feature_dim"][0]),
        train_size=int(data["train_size"][0]),
    )
