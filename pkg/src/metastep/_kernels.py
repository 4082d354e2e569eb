"""Hot numeric kernels for forest fitting and prediction.

Numba-jitted versions are used by default; setting the environment variable
METASTEP_NUMBA=0 selects the pure-numpy fallbacks (same semantics). See
benchmarks/bench_kernels.py for a comparison of the two paths.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("METASTEP_NUMBA", "1") != "0"


def _py_split_gains(X, y, features, thresholds):
    m = len(y)
    total = y.sum()
    sq_total = (y * y).sum()
    parent_sse = sq_total - total * total / m
    gains = np.full(len(features), -np.inf)
    for j, (f, thr) in enumerate(zip(features, thresholds)):
        left = X[:, f] < thr
        n_left = int(left.sum())
        if n_left == 0 or n_left == m:
            continue
        y_left = y[left]
        y_right = y[~left]
        sse_left = (y_left * y_left).sum() - y_left.sum() ** 2 / n_left
        sse_right = (y_right * y_right).sum() - y_right.sum() ** 2 / (m - n_left)
        gains[j] = parent_sse - sse_left - sse_right
    return gains


def _py_predict_forest(features, thresholds, lefts, rights, values, roots, X):
    n = len(X)
    acc = np.zeros(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        while True:
            f = features[node]
            internal = f >= 0
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            sub = node[idx]
            go_left = X[idx, f[idx]] < thresholds[sub]
            node[idx] = np.where(go_left, lefts[sub], rights[sub])
        acc += values[node]
    return acc / len(roots)


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _nb_split_gains(X, y, features, thresholds):
        m = len(y)
        total = 0.0
        sq_total = 0.0
        for i in range(m):
            total += y[i]
            sq_total += y[i] * y[i]
        parent_sse = sq_total - total * total / m
        gains = np.full(len(features), -np.inf)
        for j in range(len(features)):
            f = features[j]
            thr = thresholds[j]
            n_left = 0
            sum_left = 0.0
            sq_left = 0.0
            for i in range(m):
                if X[i, f] < thr:
                    n_left += 1
                    sum_left += y[i]
                    sq_left += y[i] * y[i]
            if n_left == 0 or n_left == m:
                continue
            n_right = m - n_left
            sum_right = total - sum_left
            sq_right = sq_total - sq_left
            sse_left = sq_left - sum_left * sum_left / n_left
            sse_right = sq_right - sum_right * sum_right / n_right
            gains[j] = parent_sse - sse_left - sse_right
        return gains

    @njit(cache=True)
    def _nb_predict_forest(features, thresholds, lefts, rights, values, roots, X):
        n = X.shape[0]
        n_trees = len(roots)
        out = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for t in range(n_trees):
                node = roots[t]
                while features[node] >= 0:
                    if X[i, features[node]] < thresholds[node]:
                        node = lefts[node]
                    else:
                        node = rights[node]
                acc += values[node]
            out[i] = acc / n_trees
        return out

    split_gains = _nb_split_gains
    predict_forest = _nb_predict_forest
else:
    split_gains = _py_split_gains
    predict_forest = _py_predict_forest
