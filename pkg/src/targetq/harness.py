"""Experiment orchestration: named environments, multi-seed runs, CSV output,
figure presets, the sample-complexity sweep, and the self-check battery.

CSV contract: header ``run_id,env,algo,seed,t,samples,sup_error,theta_norm,diverged``,
rows sorted by (seed, t), floats rendered with shortest round-trip formatting.
Identical specs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import envs as env_lib
from .algorithms import (
    AlgoConfig,
    RunLog,
    projection_variant_run,
    semi_gradient_run,
    target_network_run,
)
from .envs import Environment
from .features import load_features, normalize_features, weights_from
from .mdp import mixing_time, policy_transition, stationary_distribution

ALGOS = ("semi_gradient", "target", "target_trunc", "target_proj")

CSV_HEADER = "run_id,env,algo,seed,t,samples,sup_error,theta_norm,diverged"


@dataclass
class ExperimentSpec:
    """A reproducible multi-seed experiment. Seed of run i is base_seed + i."""

    name: str
    env: str
    algo: str
    gamma: float
    T: int
    K: int
    alpha: float
    r: float | None = None
    n_seeds: int = 1
    base_seed: int = 0
    theta0: float | None = None
    divergence_guard: float = 1e8
    log_every: int = 1
    normalize_features: bool = False
    features_path: str | None = None
    env_params: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.T < 1 or self.K < 1:
            raise ValueError("experiment specs require T >= 1 and K >= 1")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @staticmethod
    def from_json(text: str) -> "ExperimentSpec":
        data = dict(json.loads(text))
        # a nested algorithm-config block is accepted and flattened
        cfg = data.pop("cfg", None)
        if cfg:
            cfg = dict(cfg)
            cfg.pop("seed", None)  # per-run seeds come from base_seed + index
            data.update(cfg)
        data.setdefault("name", "spec")
        return ExperimentSpec(**data)


def build_environment(spec: ExperimentSpec) -> Environment:
    """Construct the environment an experiment runs on. ``env`` is either a
    built-in name or the path of a JSON file written by save_environment."""
    name = spec.env
    if name == "two_state":
        env = env_lib.two_state(gamma=spec.gamma)
    elif name == "baird":
        env = env_lib.baird(gamma=spec.gamma)
    elif name == "random":
        params = dict(spec.env_params)
        env = env_lib.random_tabular(
            int(params.get("n_states", 3)),
            int(params.get("n_actions", 2)),
            spec.gamma,
            int(params.get("mdp_seed", 0)),
        )
    elif name.endswith(".json") or os.path.exists(name):
        env = env_lib.load_environment(name)
    else:
        raise ValueError(f"unknown environment {name!r}")
    if spec.features_path:
        env = env_lib.with_features(env, load_features(spec.features_path, n_sa=env.mdp.n_sa))
    if spec.normalize_features:
        env = env_lib.with_features(env, normalize_features(env.features))
    return env


def _config_for(spec: ExperimentSpec, seed: int) -> AlgoConfig:
    return AlgoConfig(
        T=spec.T,
        K=spec.K,
        alpha=spec.alpha,
        r=spec.r,
        seed=seed,
        theta0=spec.theta0,
        divergence_guard=spec.divergence_guard,
        log_every=spec.log_every,
    )


def _run_one(env: Environment, spec: ExperimentSpec, seed: int) -> RunLog:
    cfg = _config_for(spec, seed)
    if spec.algo == "semi_gradient":
        return semi_gradient_run(env, cfg)
    if spec.algo == "target":
        return target_network_run(env, cfg, truncation=False)
    if spec.algo == "target_trunc":
        return target_network_run(env, cfg, truncation=True)
    return projection_variant_run(env, cfg)  # target_proj


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[RunLog]:
    """Run all seeds of an experiment; the result list is ordered by seed
    regardless of scheduling, so output is deterministic for any jobs value."""
    env = build_environment(spec)
    seeds = [spec.base_seed + i for i in range(spec.n_seeds)]
    if jobs <= 1 or len(seeds) == 1:
        return [_run_one(env, spec, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: _run_one(env, spec, s), seeds))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def logs_to_csv(logs: list[RunLog]) -> str:
    """Render run logs as the canonical CSV, sorted by (seed, t)."""
    rows = []
    for run_id, log in enumerate(logs):
        rows.extend(log.to_rows(run_id))
    rows.sort(key=lambda row: (row[3], row[4]))
    lines = [CSV_HEADER]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(text: str, path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

FIG_PRESETS: dict[str, ExperimentSpec] = {
    # the star MDP blows up under the classical update ...
    "fig1": ExperimentSpec(
        name="fig1", env="baird", algo="semi_gradient", gamma=0.99, T=40, K=10_000,
        alpha=0.01, theta0=1.0, log_every=1000, n_seeds=3,
    ),
    # ... and stays put once the bootstrap comes from a frozen target
    "fig2": ExperimentSpec(
        name="fig2", env="baird", algo="target", gamma=0.99, T=30, K=20_000,
        alpha=0.01, theta0=1.0, n_seeds=3,
    ),
    # the two-state example diverges under the classical update ...
    "fig3": ExperimentSpec(
        name="fig3", env="two_state", algo="semi_gradient", gamma=0.9, T=40, K=10_000,
        alpha=1e-3, theta0=1.0, log_every=1000, n_seeds=3,
    ),
    # ... and still diverges with a target network alone (no truncation)
    "fig4": ExperimentSpec(
        name="fig4", env="two_state", algo="target", gamma=0.9, T=50, K=10_000,
        alpha=1e-3, theta0=1.0, divergence_guard=100.0, n_seeds=5,
    ),
    # truncation keeps the star MDP bounded
    "fig5": ExperimentSpec(
        name="fig5", env="baird", algo="target_trunc", gamma=0.99, T=30, K=20_000,
        alpha=0.01, theta0=1.0, n_seeds=3,
    ),
    # and pins the two-state example to the truncated fixed point
    "fig6": ExperimentSpec(
        name="fig6", env="two_state", algo="target_trunc", gamma=0.9, T=50, K=20_000,
        alpha=1e-3, r=40.0, n_seeds=5,
    ),
}


def run_fig(name: str, jobs: int = 1, base_seed: int | None = None) -> str:
    if name not in FIG_PRESETS:
        raise ValueError(f"unknown figure preset {name!r}; have {sorted(FIG_PRESETS)}")
    spec = FIG_PRESETS[name]
    if base_seed is not None:
        spec = ExperimentSpec(**{**asdict(spec), "base_seed": base_seed})
    return logs_to_csv(run_experiment(spec, jobs=jobs))


# ---------------------------------------------------------------------------
# sample-complexity sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepRung:
    T: int
    K: int
    alpha: float

    @property
    def samples(self) -> int:
        return self.T * self.K


# Shipped ladder: halving the stepsize per rung drops the noise floor by
# roughly sqrt(2) while the sample count doubles, so attained accuracy scales
# like samples^(-1/2) and the log-log slope sits near 2. T is fixed and large
# enough that the gamma^T decay floor lies well under the smallest target.
SWEEP_LADDER = [
    SweepRung(T=30, K=400 * 2**j, alpha=0.16 / 2**j) for j in range(10)
]

SWEEP_EPSILONS = [0.4, 0.2, 0.1]


def sweep_experiment(
    env: Environment,
    epsilons: list[float],
    ladder: list[SweepRung],
    n_seeds: int = 10,
    base_seed: int = 0,
    jobs: int = 1,
) -> tuple[str, float]:
    """For each accuracy target, walk the ladder in order of increasing total
    samples and report the first rung whose mean terminal sup_error makes it.

    Returns the sweep CSV (``epsilon,samples,achieved_error`` plus a trailing
    ``# loglog_slope=...`` comment) and the fitted slope of log(samples)
    against log(1/epsilon) over the attained targets.
    """
    ladder = sorted(ladder, key=lambda rung: rung.samples)
    results: dict[int, float] = {}

    def mean_error(rung_index: int) -> float:
        if rung_index not in results:
            rung = ladder[rung_index]
            cfgs = [
                AlgoConfig(
                    T=rung.T, K=rung.K, alpha=rung.alpha, seed=base_seed + i,
                    log_every=rung.T,
                )
                for i in range(n_seeds)
            ]
            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    logs = list(
                        pool.map(lambda c: target_network_run(env, c, truncation=True), cfgs)
                    )
            else:
                logs = [target_network_run(env, c, truncation=True) for c in cfgs]
            results[rung_index] = float(np.mean([log.records[-1].sup_error for log in logs]))
        return results[rung_index]

    lines = ["epsilon,samples,achieved_error"]
    attained: list[tuple[float, int]] = []
    for eps in sorted(epsilons, reverse=True):
        hit = None
        for i in range(len(ladder)):
            err = mean_error(i)
            if err <= eps:
                hit = (ladder[i].samples, err)
                break
        if hit is None:
            lines.append(f"{_fmt(float(eps))},-1,nan")
        else:
            attained.append((eps, hit[0]))
            lines.append(f"{_fmt(float(eps))},{hit[0]},{_fmt(hit[1])}")
    if len(attained) >= 2:
        xs = np.log([1.0 / e for e, _ in attained])
        ys = np.log([s for _, s in attained])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = float("nan")
    lines.append(f"# loglog_slope={_fmt(slope)}")
    return "\n".join(lines) + "\n", slope


def sweep_env() -> Environment:
    """The committed sweep environment: a 3-state, 2-action random MDP at
    gamma 0.8 with rewards scaled to [0, 10] so the stochastic noise floor
    spans the shipped accuracy targets."""
    from .envs import random_mdp, tabular
    from .mdp import Mdp

    base = random_mdp(3, 2, 0.8, seed=1)
    scaled = Mdp(
        n_states=3, n_actions=2, gamma=0.8,
        rewards=base.rewards * 10.0, transitions=base.transitions,
    )
    return tabular(scaled, name="sweep-3x2")


def shipped_sweep(jobs: int = 1, base_seed: int = 0) -> tuple[str, float]:
    """Run the committed sweep recipe."""
    return sweep_experiment(
        sweep_env(), SWEEP_EPSILONS, SWEEP_LADDER, n_seeds=10, base_seed=base_seed, jobs=jobs
    )


# ---------------------------------------------------------------------------
# self-check battery
# ---------------------------------------------------------------------------


def run_checks() -> tuple[str, bool]:
    """Deterministic property battery over every module; returns the report
    text and overall pass flag. Kept fast enough to run on every change."""
    from . import checks

    return checks.run_all()


def bound_inputs_for(
    env: Environment,
    alpha: float,
    T: int,
    K: int,
    init_gap: float,
    approx_error: float = 0.0,
):
    """Assemble plug-in bound inputs for an environment: exact mixing time at
    precision alpha, Gram lambda_min from the behavior occupancy."""
    from .features import gram_and_lambda_min
    from .oracles import BoundInputs

    weights = weights_from(env.mdp, env.behavior)
    _, lam_min = gram_and_lambda_min(env.features, weights)
    chain = policy_transition(env.mdp, env.behavior)
    mu = stationary_distribution(chain)
    t_mix = mixing_time(chain, mu, delta=alpha)
    return BoundInputs(
        gamma=env.mdp.gamma,
        lambda_min=lam_min,
        alpha=alpha,
        t_mix=t_mix,
        inner_steps=K,
        outer_steps=T,
        init_gap=init_gap,
        approx_error=approx_error,
    )
