"""Experiment configuration, profiles and run manifests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from . import __version__
from .envs import family_config

ENV_PREFIX = "METASTEP_"


@dataclass
class ExperimentConfig:
    family: str = "nav2d"
    dataset_mode: str = "trajectory"  # trajectory | generative
    K: int = 500
    T: int = 20
    n: int = 50
    horizon: int = 0  # 0 = family default
    gamma: float = -1.0  # < 0 = family default
    meta_gamma: float = 1.0
    sigma: float = -1.0  # < 0 = family default
    h_min: float = -1.0  # < 0 = family default
    h_max: float = -1.0
    n_trees: int = 50
    min_split_fraction: float = 0.01
    k_features: int = 0  # 0 = all features
    lam: float = 0.75
    fqi_iterations: int = 3
    n_validation_tasks: int = 10
    n_test_tasks: int = 20
    cg_iters: int = 10
    damping: float = 1e-3
    seed: int = 0
    ablate_context: bool = False
    baseline_grid: tuple[float, ...] = ()
    out_dir: str = "runs/default"

    def __post_init__(self):
        cfg = family_config(self.family)
        if self.dataset_mode not in ("trajectory", "generative"):
            raise ValueError("dataset_mode must be 'trajectory' or 'generative'")
        if self.horizon == 0:
            self.horizon = cfg.horizon
        if self.gamma < 0:
            self.gamma = cfg.gamma
        if self.sigma < 0:
            self.sigma = cfg.sigma
        if self.h_min < 0:
            self.h_min = cfg.h_range[0]
        if self.h_max < 0:
            self.h_max = cfg.h_range[1]
        if not self.baseline_grid:
            self.baseline_grid = _default_grid(cfg.h_range[1])
        for name in ("K", "T", "n", "fqi_iterations", "n_validation_tasks", "n_test_tasks"):
            if getattr(self, name) < 1:
                raise ValueError(f"config field {name} must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["baseline_grid"] = list(self.baseline_grid)
        return d


def _default_grid(h_max: float) -> tuple[float, ...]:
    # five octaves below the family's largest admissible step
    return tuple(h_max / 2**k for k in reversed(range(5)))


# Appendix-scale run sizes per family ("paper") and a minutes-scale shrink
# ("desk") that preserves the comparison protocol.
PROFILES: dict[str, dict[str, dict]] = {
    "paper": {
        "nav2d": dict(dataset_mode="trajectory", K=4000, T=20, n=200, n_trees=50,
                      min_split_fraction=0.01, fqi_iterations=5,
                      n_validation_tasks=20, n_test_tasks=20),
        "minigolf": dict(dataset_mode="generative", K=10000, T=50, n=400, n_trees=50,
                         min_split_fraction=0.01, fqi_iterations=5,
                         n_validation_tasks=20, n_test_tasks=20),
        "cartpole": dict(dataset_mode="trajectory", K=3200, T=15, n=100, n_trees=150,
                         min_split_fraction=0.05, fqi_iterations=5,
                         n_validation_tasks=20, n_test_tasks=20),
        "swingup": dict(dataset_mode="trajectory", K=300, T=25, n=100, n_trees=150,
                        min_split_fraction=0.05, fqi_iterations=5,
                        n_validation_tasks=20, n_test_tasks=20),
    },
    "desk": {
        "nav2d": dict(dataset_mode="trajectory", K=500, T=20, n=50, n_trees=50,
                      min_split_fraction=0.01, fqi_iterations=3,
                      n_validation_tasks=10, n_test_tasks=20),
        "minigolf": dict(dataset_mode="generative", K=3000, T=20, n=100, n_trees=50,
                         min_split_fraction=0.01, fqi_iterations=3,
                         n_validation_tasks=10, n_test_tasks=20),
        "cartpole": dict(dataset_mode="trajectory", K=300, T=15, n=50, n_trees=50,
                         min_split_fraction=0.05, fqi_iterations=3,
                         n_validation_tasks=10, n_test_tasks=20),
        "swingup": dict(dataset_mode="trajectory", K=100, T=15, n=50, n_trees=50,
                        min_split_fraction=0.05, fqi_iterations=2,
                        n_validation_tasks=10, n_test_tasks=20),
    },
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name == "baseline_grid":
        if raw.startswith("["):
            return tuple(json.loads(raw))
        return tuple(float(v) for v in raw.split(",") if v.strip())
    ftype = _FIELD_TYPES.get(name)
    if ftype == "bool":
        return raw.lower() in ("1", "true", "yes", "on")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_config_file(path) -> dict:
    """key = value lines; '#' starts a comment; names match ExperimentConfig."""
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config field {key!r}")
            overrides[key] = _parse_value(key, raw)
    return overrides


def env_overrides(environ=None) -> dict:
    """METASTEP_<FIELD>=value environment overrides (CI hook)."""
    environ = os.environ if environ is None else environ
    overrides = {}
    for name in _FIELD_TYPES:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            overrides[name] = _parse_value(name, raw)
    return overrides


def build_config(
    family: str | None = None,
    profile: str | None = None,
    config_file=None,
    seed: int | None = None,
    out_dir: str | None = None,
    use_env: bool = True,
) -> ExperimentConfig:
    """Layered config: profile defaults < config file < env vars < CLI flags."""
    values: dict = {}
    file_values = parse_config_file(config_file) if config_file else {}
    fam = family or file_values.get("family", "nav2d")
    values["family"] = fam
    if profile:
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        values.update(PROFILES[profile][fam])
    values.update(file_values)
    if use_env:
        values.update(env_overrides())
    if seed is not None:
        values["seed"] = seed
    if out_dir is not None:
        values["out_dir"] = out_dir
    values["family"] = fam
    return ExperimentConfig(**values)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    config: dict
    stage: str
    seeds: dict = field(default_factory=dict)
    dataset_hash: str = ""
    version: str = __version__
    created_at: str = ""
    files: dict = field(default_factory=dict)

    def save(self, path) -> None:
        data = dataclasses.asdict(self)
        if not data["created_at"]:
            data["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))
