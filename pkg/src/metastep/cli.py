"""Command-line experiment orchestration.

Subcommands: gen-dataset, train, select, evaluate, baseline, ablate,
lipschitz-check. Every stage writes CSV outputs plus a JSON manifest; the
pipeline is deterministic given the manifest (same master seed => byte
identical CSVs).
"""

from __future__ import annotations

import argparse
import csv
import json
import os

import numpy as np

from .baselines import evaluate_baseline
from .config import (
    ExperimentConfig,
    RunManifest,
    build_config,
    file_sha256,
)
from .envs import family_config, sample_context
from .evaluation import TaskResults, evaluate_tasks, run_stepsize_episode
from .extratrees import TreeParams, fit_forest, load_forest, predict_batch, save_forest
from .fqi import (
    FqiRun,
    QPair,
    evaluate_policy,
    fqi_train,
    make_action_grid,
    select_model,
)
from .lipschitz import verify_return_bound
from .metamdp import (
    generate_dataset_generative,
    generate_dataset_trajectory,
    initial_policy,
    read_transitions_csv,
    write_transitions_csv,
)
from .rl import RngStream

# per-stage stream tags under the master seed
DATASET_STREAM = 0
VALIDATION_STREAM = 1
TEST_STREAM = 2
LIPSCHITZ_STREAM = 3

T_CRIT_95 = {  # two-sided Student-t 0.975 quantiles by degrees of freedom
    1: 12.7062047364,
    2: 4.3026527297,
    3: 3.1824463053,
    4: 2.7764451052,
    5: 2.5705818356,
    6: 2.4469118511,
    7: 2.3646242516,
    8: 2.3060041352,
    9: 2.2621571628,
    10: 2.2281388520,
    14: 2.1447866879,
    19: 2.0930240544,
    24: 2.0638985616,
    29: 2.0452296421,
    49: 2.0095752371,
    99: 1.9842169515,
}


def t_crit_95(dof: int) -> float:
    """0.975 Student-t quantile; exact at tabulated dof, else the next lower
    tabulated entry (conservative)."""
    if dof < 1:
        raise ValueError("need at least 2 samples for a t interval")
    keys = sorted(T_CRIT_95)
    best = keys[0]
    for k in keys:
        if k <= dof:
            best = k
    return T_CRIT_95[best]


def t_confidence_halfwidth(values: np.ndarray) -> float:
    """95% Student-t half-width over task-level values."""
    values = np.asarray(values, dtype=float)
    m = len(values)
    if m < 2:
        return 0.0
    return t_crit_95(m - 1) * values.std(ddof=1) / np.sqrt(m)


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_task_results_csv(out_dir: str, results: TaskResults, prefix: str = "") -> None:
    """returns.csv: one row per step (T+1 rows); htrace.csv: one row per update."""
    steps = results.returns.shape[1]
    rows = []
    for s in range(steps):
        vals = results.returns[:, s]
        rows.append(
            [
                s,
                _fmt(vals.mean()),
                _fmt(vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0),
                _fmt(t_confidence_halfwidth(vals)),
                _fmt(results.overshoot_frac[:, s].mean()),
            ]
        )
    _write_csv(
        os.path.join(out_dir, prefix + "returns.csv"),
        ["step", "mean_return", "stderr", "ci95_halfwidth", "overshoot_frac"],
        rows,
    )
    if results.step_sizes.size:
        h_rows = [
            [s, _fmt(results.step_sizes[:, s].mean())]
            for s in range(results.step_sizes.shape[1])
        ]
        _write_csv(
            os.path.join(out_dir, prefix + "htrace.csv"), ["step", "mean_h"], h_rows
        )


def _tree_params(config: ExperimentConfig) -> TreeParams:
    return TreeParams(
        n_trees=config.n_trees,
        min_split_fraction=config.min_split_fraction,
        k_features=config.k_features or None,
        seed=config.seed,
    )


def _generate(config: ExperimentConfig, fixed_context=None):
    rng = RngStream(config.seed, (DATASET_STREAM,))
    if config.dataset_mode == "generative":
        return generate_dataset_generative(
            config.family,
            config.K,
            config.n,
            rng,
            cg_iters=config.cg_iters,
            damping=config.damping,
            fixed_context=fixed_context,
        )
    return generate_dataset_trajectory(
        config.family,
        config.K,
        config.T,
        config.n,
        rng,
        cg_iters=config.cg_iters,
        damping=config.damping,
        fixed_context=fixed_context,
    )


def cmd_gen_dataset(config: ExperimentConfig) -> str:
    out_dir = _ensure_dir(config.out_dir)
    transitions = _generate(config)
    dataset_path = os.path.join(out_dir, "dataset.csv")
    write_transitions_csv(dataset_path, transitions)
    manifest = RunManifest(
        config=config.to_dict(),
        stage="gen-dataset",
        seeds={"dataset": config.seed, "stream": DATASET_STREAM},
        dataset_hash=file_sha256(dataset_path),
        files={"dataset": "dataset.csv"},
    )
    manifest.save(os.path.join(out_dir, "manifest.json"))
    print(f"wrote {len(transitions)} transitions to {dataset_path}")
    return dataset_path


def _save_run(run: FqiRun, out_dir: str, config: ExperimentConfig, include_context: bool, single_q: bool):
    models_dir = _ensure_dir(os.path.join(out_dir, "models"))
    for qpair in run.models:
        save_forest(qpair.q1, os.path.join(models_dir, f"iter_{qpair.iteration}_q1.npz"))
        save_forest(qpair.q2, os.path.join(models_dir, f"iter_{qpair.iteration}_q2.npz"))
    meta = {
        "lam": config.lam,
        "meta_gamma": config.meta_gamma,
        "h_min": config.h_min,
        "h_max": config.h_max,
        "iterations": [q.iteration for q in run.models],
        "include_context": include_context,
        "single_q": single_q,
    }
    with open(os.path.join(models_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(
        os.path.join(out_dir, "training_log.csv"),
        ["iteration", "target_min", "target_max", "target_mean", "target_std"],
        [
            [e["iteration"], _fmt(e["target_min"]), _fmt(e["target_max"]),
             _fmt(e["target_mean"]), _fmt(e["target_std"])]
            for e in run.training_log
        ],
    )


def load_run(out_dir: str) -> FqiRun:
    models_dir = os.path.join(out_dir, "models")
    with open(os.path.join(models_dir, "meta.json")) as fh:
        meta = json.load(fh)
    grid = make_action_grid(meta["h_min"], meta["h_max"])
    models = []
    for it in meta["iterations"]:
        q1 = load_forest(os.path.join(models_dir, f"iter_{it}_q1.npz"))
        q2 = load_forest(os.path.join(models_dir, f"iter_{it}_q2.npz"))
        models.append(QPair(q1=q1, q2=q2, lam=meta["lam"], action_grid=grid, iteration=it))
    return FqiRun(models=models, meta_gamma=meta["meta_gamma"])


def cmd_train(config: ExperimentConfig, dataset_path: str | None = None,
              include_context: bool | None = None, single_q: bool = False) -> FqiRun:
    out_dir = _ensure_dir(config.out_dir)
    dataset_path = dataset_path or os.path.join(out_dir, "dataset.csv")
    manifest_path = os.path.join(os.path.dirname(dataset_path), "manifest.json")
    if os.path.exists(manifest_path):
        recorded = RunManifest.load(manifest_path).dataset_hash
        actual = file_sha256(dataset_path)
        if recorded and recorded != actual:
            raise RuntimeError(
                f"dataset hash mismatch: manifest records {recorded[:12]}..., "
                f"file is {actual[:12]}... (stale data guard)"
            )
    transitions = read_transitions_csv(dataset_path)
    if include_context is None:
        include_context = not config.ablate_context
    grid = make_action_grid(config.h_min, config.h_max)
    run = fqi_train(
        transitions,
        config.fqi_iterations,
        config.meta_gamma,
        config.lam,
        _tree_params(config),
        grid,
        seed=config.seed,
        include_context=include_context,
        single_q=single_q,
    )
    _save_run(run, out_dir, config, include_context, single_q)
    manifest = RunManifest(
        config=config.to_dict(),
        stage="train",
        seeds={"fit": config.seed},
        dataset_hash=file_sha256(dataset_path),
        files={"models": "models/", "training_log": "training_log.csv"},
    )
    manifest.save(os.path.join(out_dir, "manifest_train.json"))
    print(f"trained {len(run.models)} FQI iterations into {out_dir}/models")
    return run


def cmd_select(config: ExperimentConfig, run: FqiRun | None = None) -> int:
    out_dir = _ensure_dir(config.out_dir)
    run = run or load_run(out_dir)
    rng = RngStream(config.seed, (VALIDATION_STREAM,))
    best, means = select_model(
        run, config.family, config.n_validation_tasks, config.T, config.n, rng,
        cg_iters=config.cg_iters, damping=config.damping,
    )
    _write_csv(
        os.path.join(out_dir, "selection.csv"),
        ["iteration", "mean_final_return"],
        [[i + 1, _fmt(m)] for i, m in enumerate(means)],
    )
    with open(os.path.join(out_dir, "selected.json"), "w") as fh:
        json.dump({"selected_iteration": best}, fh)
        fh.write("\n")
    print(f"selected FQI iteration {best} (validation means: {means})")
    return best


def cmd_evaluate(config: ExperimentConfig, run: FqiRun | None = None,
                 iteration: int | None = None, prefix: str = "") -> TaskResults:
    out_dir = _ensure_dir(config.out_dir)
    run = run or load_run(out_dir)
    if iteration is None:
        selected_path = os.path.join(out_dir, "selected.json")
        if os.path.exists(selected_path):
            with open(selected_path) as fh:
                iteration = json.load(fh)["selected_iteration"]
        else:
            iteration = len(run.models)
    qpair = run.models[iteration - 1]
    rng = RngStream(config.seed, (TEST_STREAM,))
    results = evaluate_policy(
        qpair, config.family, config.n_test_tasks, config.T, config.n, rng,
        cg_iters=config.cg_iters, damping=config.damping,
    )
    write_task_results_csv(out_dir, results, prefix=prefix)
    print(
        f"evaluated iteration {iteration}: final mean return "
        f"{results.final_returns().mean():.4f}"
    )
    return results


def cmd_baseline(config: ExperimentConfig, kind: str, grid=None):
    out_dir = _ensure_dir(config.out_dir)
    grid = list(grid) if grid else list(config.baseline_grid)
    if not grid:
        raise ValueError("baseline grid must be nonempty")
    rng = RngStream(config.seed, (TEST_STREAM,))  # paired with FQI evaluation
    summary = []
    results_by_alpha = {}
    for alpha in grid:
        sub = _ensure_dir(os.path.join(out_dir, f"baseline_{kind}", f"alpha_{alpha:g}"))
        results = evaluate_baseline(
            kind, config.family, alpha, config.n_test_tasks, config.T, config.n, rng,
            cg_iters=config.cg_iters, damping=config.damping,
        )
        write_task_results_csv(sub, results)
        finals = results.final_returns()
        summary.append([alpha, _fmt(finals.mean()),
                        _fmt(finals.std(ddof=1) / np.sqrt(len(finals)))])
        results_by_alpha[alpha] = results
    # best alpha: highest final mean, ties toward the smaller alpha
    means = [float(s[1]) for s in summary]
    best_idx = 0
    for i, m in enumerate(means):
        if m > means[best_idx]:
            best_idx = i
    best_alpha = grid[best_idx]
    _write_csv(
        os.path.join(out_dir, f"baseline_{kind}", "summary.csv"),
        ["alpha", "final_mean_return", "final_stderr"],
        summary,
    )
    with open(os.path.join(out_dir, f"baseline_{kind}", "best.json"), "w") as fh:
        json.dump({"best_alpha": best_alpha}, fh)
        fh.write("\n")
    print(f"baseline {kind}: best alpha {best_alpha}")
    return best_alpha, results_by_alpha


def _side_by_side(out_dir, name, base: TaskResults, ablated: TaskResults):
    rows = [
        [s, _fmt(base.returns[:, s].mean()), _fmt(ablated.returns[:, s].mean())]
        for s in range(base.returns.shape[1])
    ]
    _write_csv(
        os.path.join(out_dir, f"ablation_{name}.csv"),
        ["step", "base_mean_return", "ablated_mean_return"],
        rows,
    )


def cmd_ablate(config: ExperimentConfig, ablation: str):
    out_dir = _ensure_dir(config.out_dir)
    known = ("no-context", "single-q", "fixed-context", "single-action")
    if ablation not in known:
        raise ValueError(f"unknown ablation {ablation!r}; choose from {known}")
    base_run = load_run(out_dir)
    base = cmd_evaluate(config, run=base_run, prefix="base_")
    sub_cfg_dir = os.path.join(out_dir, f"ablate_{ablation}")
    dataset_path = os.path.join(out_dir, "dataset.csv")
    rng_test = RngStream(config.seed, (TEST_STREAM,))

    if ablation in ("no-context", "single-q"):
        sub = ExperimentConfig(**{**config.to_dict(), "out_dir": sub_cfg_dir})
        run = cmd_train(
            sub,
            dataset_path=dataset_path,
            include_context=(ablation != "no-context"),
            single_q=(ablation == "single-q"),
        )
        best = cmd_select(sub, run=run)
        ablated = cmd_evaluate(sub, run=run, iteration=best)
    elif ablation == "fixed-context":
        context = sample_context(config.family, RngStream(config.seed, (4, 0)))
        sub = ExperimentConfig(**{**config.to_dict(), "out_dir": sub_cfg_dir})
        _ensure_dir(sub_cfg_dir)
        transitions = _generate(sub, fixed_context=context)
        write_transitions_csv(os.path.join(sub_cfg_dir, "dataset.csv"), transitions)
        grid = make_action_grid(sub.h_min, sub.h_max)
        run = fqi_train(
            transitions, sub.fqi_iterations, sub.meta_gamma, sub.lam,
            _tree_params(sub), grid, seed=sub.seed,
        )
        _save_run(run, sub_cfg_dir, sub, True, False)
        from .fqi import greedy_action

        gamma = family_config(sub.family).gamma

        def episode(env, params, episode_rng):
            qpair = run.models[-1]
            return run_stepsize_episode(
                env, params, sub.T, sub.n, gamma, episode_rng,
                lambda t, x, g: greedy_action(qpair, x),
                sub.cg_iters, sub.damping,
            )

        ablated = evaluate_tasks(
            sub.family, episode, sub.n_test_tasks, rng_test, fixed_context=context
        )
        write_task_results_csv(_ensure_dir(sub_cfg_dir), ablated)
    else:  # single-action: regress final return on (omega, h), pick one h per task
        sub = ExperimentConfig(**{**config.to_dict(), "out_dir": sub_cfg_dir})
        _ensure_dir(sub_cfg_dir)
        gamma = family_config(sub.family).gamma
        gen_rng = RngStream(sub.seed, (DATASET_STREAM, 1))
        cfg = family_config(sub.family)
        rows_x, rows_y = [], []
        n_episodes = max(1, sub.K // sub.T)  # same rollout budget as the base dataset
        for k in range(n_episodes):
            context = sample_context(sub.family, gen_rng.split(k, 0))
            from .envs import make_env

            env = make_env(sub.family, context)
            params = initial_policy(sub.family, gen_rng.split(k, 1))
            h = float(gen_rng.split(k, 3).generator().uniform(*cfg.h_range))
            result = run_stepsize_episode(
                env, params, sub.T, sub.n, gamma, gen_rng.split(k, 2),
                lambda t, x, g: h, sub.cg_iters, sub.damping,
            )
            rows_x.append(np.concatenate([context, [h]]))
            rows_y.append(result.returns[-1])
        forest = fit_forest(
            np.stack(rows_x), np.array(rows_y), _tree_params(sub), seed=sub.seed
        )
        grid = make_action_grid(sub.h_min, sub.h_max)

        def episode(env, params, episode_rng):
            inputs = np.concatenate(
                [np.repeat(env.context[None, :], len(grid), axis=0), grid[:, None]],
                axis=1,
            )
            h_star = float(grid[int(np.argmax(predict_batch(forest, inputs)))])
            return run_stepsize_episode(
                env, params, sub.T, sub.n, gamma, episode_rng,
                lambda t, x, g: h_star, sub.cg_iters, sub.damping,
            )

        ablated = evaluate_tasks(sub.family, episode, sub.n_test_tasks, rng_test)
        write_task_results_csv(sub_cfg_dir, ablated)

    _side_by_side(out_dir, ablation.replace("-", "_"), base, ablated)
    print(f"ablation {ablation}: final mean {ablated.final_returns().mean():.4f} "
          f"vs base {base.final_returns().mean():.4f}")
    return base, ablated


def cmd_lipschitz_check(config: ExperimentConfig, n_pairs: int = 1000,
                        sigma: float | None = None):
    out_dir = _ensure_dir(config.out_dir)
    rng = RngStream(config.seed, (LIPSCHITZ_STREAM,))
    policy = initial_policy("nav2d", rng.split(0))
    if sigma is not None:
        from .rl import PolicyParams

        policy = PolicyParams(policy.theta, sigma, policy.state_dim, policy.action_dim)
    report = verify_return_bound(policy, n_pairs, config.n, rng.split(1))
    rows = [
        [int(report.pair_id[i]), _fmt(report.distance[i]), _fmt(report.delta_j[i]),
         _fmt(report.bound[i]), _fmt(report.slack[i]), int(report.passed[i])]
        for i in range(n_pairs)
    ]
    _write_csv(
        os.path.join(out_dir, "lipschitz_report.csv"),
        ["pair_id", "distance", "abs_delta_j", "bound", "slack", "pass"],
        rows,
    )
    print(f"lipschitz check: {report.violations} violations out of {n_pairs} pairs")
    return report


def _add_common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--profile", choices=["desk", "paper"], help="size profile")
    parser.add_argument("--family",
                        choices=["nav2d", "minigolf", "cartpole", "swingup"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker cap (results are worker-count independent)")
    parser.add_argument("--out", help="output directory")


def _config_from_args(args) -> ExperimentConfig:
    return build_config(
        family=args.family,
        profile=args.profile,
        config_file=args.config,
        seed=args.seed,
        out_dir=args.out,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="metastep",
        description="step-size controller experiments on contextual MDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("gen-dataset", "train", "select", "evaluate"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "train":
            p.add_argument("--data", help="dataset CSV path")
        if name == "evaluate":
            p.add_argument("--iteration", type=int, help="FQI iteration to evaluate")

    p = sub.add_parser("baseline")
    _add_common(p)
    p.add_argument("--kind", required=True,
                   choices=["fixed", "decay", "expdecay", "adam", "rmsprop", "metagrad"])
    p.add_argument("--grid", help="comma-separated alpha grid")

    p = sub.add_parser("ablate")
    _add_common(p)
    p.add_argument("--ablation", required=True,
                   choices=["no-context", "single-q", "fixed-context", "single-action"])

    p = sub.add_parser("lipschitz-check")
    _add_common(p)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--sigma", type=float, help="override policy sigma")

    args = parser.parse_args(argv)
    config = _config_from_args(args)

    if args.command == "gen-dataset":
        cmd_gen_dataset(config)
    elif args.command == "train":
        cmd_train(config, dataset_path=getattr(args, "data", None))
    elif args.command == "select":
        cmd_select(config)
    elif args.command == "evaluate":
        cmd_evaluate(config, iteration=getattr(args, "iteration", None))
    elif args.command == "baseline":
        grid = [float(v) for v in args.grid.split(",")] if args.grid else None
        cmd_baseline(config, args.kind, grid)
    elif args.command == "ablate":
        cmd_ablate(config, args.ablation)
    elif args.command == "lipschitz-check":
        cmd_lipschitz_check(config, n_pairs=args.pairs, sigma=args.sigma)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
