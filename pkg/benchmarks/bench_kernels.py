"""Benchmark the numba-jitted forest kernels against the pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--rows N] [--trees T]

The two paths share semantics (checked here before timing); the env flag
METASTEP_NUMBA=0 selects the numpy path inside the package itself.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from metastep import _kernels
from metastep.extratrees import TreeParams, fit_forest


def _time(fn, *args, repeats=5):
    fn(*args)  # warmup (includes jit compilation)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--trees", type=int, default=50)
    args = parser.parse_args()

    if not _kernels.USE_NUMBA:
        raise SystemExit("run without METASTEP_NUMBA=0: both paths are imported here")

    gen = np.random.default_rng(0)
    X = gen.standard_normal((args.rows, args.dim))
    y = X[:, 0] * 2.0 + np.sin(X[:, 1]) + 0.1 * gen.standard_normal(args.rows)

    feats = np.arange(args.dim, dtype=np.int64)
    thrs = gen.uniform(-1, 1, size=args.dim)
    g_py = _kernels._py_split_gains(X, y, feats, thrs)
    g_nb = _kernels._nb_split_gains(X, y, feats, thrs)
    assert np.allclose(g_py, g_nb, atol=1e-8), "kernel paths disagree on gains"

    forest = fit_forest(X[:2000], y[:2000], TreeParams(n_trees=args.trees), seed=1)
    flat = (forest.features, forest.thresholds, forest.lefts, forest.rights,
            forest.values, forest.roots)
    p_py = _kernels._py_predict_forest(*flat, X)
    p_nb = _kernels._nb_predict_forest(*flat, X)
    assert np.allclose(p_py, p_nb), "kernel paths disagree on predictions"

    t_gain_py = _time(_kernels._py_split_gains, X, y, feats, thrs)
    t_gain_nb = _time(_kernels._nb_split_gains, X, y, feats, thrs)
    t_pred_py = _time(_kernels._py_predict_forest, *flat, X)
    t_pred_nb = _time(_kernels._nb_predict_forest, *flat, X)

    print(f"rows={args.rows} dim={args.dim} trees={args.trees}")
    print(f"split_gains     numpy {t_gain_py * 1e3:8.2f} ms   numba "
          f"{t_gain_nb * 1e3:8.2f} ms   speedup {t_gain_py / t_gain_nb:5.1f}x")
    print(f"predict_forest  numpy {t_pred_py * 1e3:8.2f} ms   numba "
          f"{t_pred_nb * 1e3:8.2f} ms   speedup {t_pred_py / t_pred_nb:5.1f}x")


if __name__ == "__main__":
    main()
