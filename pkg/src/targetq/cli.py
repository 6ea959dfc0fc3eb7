"""Command-line entry point.

Subcommands: run, sweep, check, bound, env export|import, fig. The
``DTL_SEED`` environment variable, when set, overrides the base seed of any
subcommand that runs experiments.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .envs import default_radius, load_environment, save_environment
from .features import weights_from
from .harness import (
    ALGOS,
    FIG_PRESETS,
    ExperimentSpec,
    build_environment,
    logs_to_csv,
    run_checks,
    run_experiment,
    run_fig,
    shipped_sweep,
    bound_inputs_for,
    write_csv,
)
from .oracles import finite_sample_bound


def _base_seed(value: int) -> int:
    env_seed = os.environ.get("DTL_SEED")
    if env_seed is not None:
        return int(env_seed)
    return value


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", default="two_state", help="built-in name or environment JSON path")
    p.add_argument("--algo", default="target_trunc", choices=ALGOS)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--T", type=int, default=50)
    p.add_argument("--K", type=int, default=10_000)
    p.add_argument("--r", type=float, default=None, help="truncation radius (default: env radius)")
    p.add_argument("--seeds", type=int, default=1, help="number of seeds (base_seed + i)")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.add_argument("--normalize-features", action="store_true")
    p.add_argument("--features", default=None, metavar="FILE", help="feature matrix JSON")
    p.add_argument("--theta0", type=float, default=None, help="scalar initial weight value")
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--guard", type=float, default=1e8, help="divergence guard on ||theta||_2")
    p.add_argument("--spec", default=None, metavar="FILE", help="experiment spec JSON (overrides flags)")


def _spec_from_args(args) -> ExperimentSpec:
    if args.spec:
        with open(args.spec) as fh:
            spec = ExperimentSpec.from_json(fh.read())
        if args.out:
            spec.out = args.out
        return spec
    return ExperimentSpec(
        name="cli",
        env=args.env,
        algo=args.algo,
        gamma=args.gamma,
        T=args.T,
        K=args.K,
        alpha=args.alpha,
        r=args.r,
        n_seeds=args.seeds,
        base_seed=_base_seed(args.base_seed),
        theta0=args.theta0,
        divergence_guard=args.guard,
        log_every=args.log_every,
        normalize_features=args.normalize_features,
        features_path=args.features,
        out=args.out,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        write_csv(text, out)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    logs = run_experiment(spec, jobs=args.jobs)
    _emit(logs_to_csv(logs), spec.out)
    return 0


def cmd_sweep(args) -> int:
    text, slope = shipped_sweep(jobs=args.jobs, base_seed=_base_seed(args.base_seed))
    _emit(text, args.out)
    if args.out:
        print(f"loglog_slope={slope:.4f}")
    return 0


def cmd_check(_args) -> int:
    report, ok = run_checks()
    sys.stdout.write(report)
    return 0 if ok else 1


def cmd_bound(args) -> int:
    if args.env:
        spec = ExperimentSpec(
            name="bound", env=args.env, algo="target_trunc", gamma=args.gamma,
            T=args.T, K=args.K, alpha=args.alpha,
        )
        env = build_environment(spec)
        init_gap = args.init_gap
        if init_gap is None:
            init_gap = float(np.max(np.abs(env.q_star)))
        inputs = bound_inputs_for(
            env, args.alpha, args.T, args.K, init_gap, approx_error=args.approx_error
        )
    else:
        if args.lambda_min is None or args.t_mix is None or args.init_gap is None:
            print("bound: need --env, or all of --lambda-min --t-mix --init-gap", file=sys.stderr)
            return 2
        from .oracles import BoundInputs

        inputs = BoundInputs(
            gamma=args.gamma, lambda_min=args.lambda_min, alpha=args.alpha,
            t_mix=args.t_mix, inner_steps=args.K, outer_steps=args.T,
            init_gap=args.init_gap, approx_error=args.approx_error,
        )
    terms = finite_sample_bound(inputs)
    rows = [
        ("gamma", inputs.gamma),
        ("lambda_min", inputs.lambda_min),
        ("alpha", inputs.alpha),
        ("t_mix", inputs.t_mix),
        ("K_inner", inputs.inner_steps),
        ("T_outer", inputs.outer_steps),
        ("init_gap", inputs.init_gap),
        ("approx_error", inputs.approx_error),
        ("e1_decay", terms.decay),
        ("e2_tail", terms.tail),
        ("e3_noise", terms.noise),
        ("e4_approx", terms.approx),
        ("total", terms.total),
        ("stepsize_ok", terms.stepsize_ok),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        text = repr(value) if isinstance(value, float) else str(value)
        print(f"{key:<{width}}  {text}")
    if not terms.stepsize_ok:
        limit = inputs.lambda_min * (1.0 - inputs.gamma) ** 2 / 130.0
        print(f"warning: alpha exceeds the guaranteed-regime limit {limit!r}")
    return 0


def cmd_env(args) -> int:
    if args.env_command == "export":
        spec = ExperimentSpec(
            name="export", env=args.env, algo="target_trunc", gamma=args.gamma,
            T=1, K=1, alpha=1e-3,
            normalize_features=args.normalize_features, features_path=args.features,
        )
        env = build_environment(spec)
        save_environment(env, args.out)
        print(f"wrote {args.out} ({env.name}: {env.mdp.n_states} states, "
              f"{env.mdp.n_actions} actions, d={env.features.d})")
        return 0
    env = load_environment(args.file)
    weights = weights_from(env.mdp, env.behavior)
    from .features import gram_and_lambda_min

    _, lam = gram_and_lambda_min(env.features, weights)
    print(f"name          {env.name}")
    print(f"states        {env.mdp.n_states}")
    print(f"actions       {env.mdp.n_actions}")
    print(f"gamma         {env.mdp.gamma!r}")
    print(f"features d    {env.features.d}")
    print(f"lambda_min    {lam!r}")
    print(f"sup |Q*|      {float(np.max(np.abs(env.q_star)))!r}")
    print(f"default r     {default_radius(env)!r}")
    return 0


def cmd_fig(args) -> int:
    base = os.environ.get("DTL_SEED")
    text = run_fig(args.name, jobs=args.jobs, base_seed=int(base) if base is not None else None)
    out = args.out or f"{args.name}.csv"
    _emit(text, out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="targetq",
        description="Q-learning with linear features: divergence examples, "
        "target-network and truncation runs, exact oracles, error bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment, emit the run CSV")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sample-complexity sweep on the shipped recipe")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--base-seed", type=int, default=0)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_check = sub.add_parser("check", help="run the self-check battery")
    p_check.set_defaults(fn=cmd_check)

    p_bound = sub.add_parser("bound", help="evaluate the finite-sample error bound")
    p_bound.add_argument("--env", default=None, help="derive lambda_min/t_mix from this environment")
    p_bound.add_argument("--gamma", type=float, default=0.9)
    p_bound.add_argument("--alpha", type=float, required=True)
    p_bound.add_argument("--T", type=int, required=True)
    p_bound.add_argument("--K", type=int, required=True)
    p_bound.add_argument("--lambda-min", type=float, default=None, dest="lambda_min")
    p_bound.add_argument("--t-mix", type=int, default=None, dest="t_mix")
    p_bound.add_argument("--init-gap", type=float, default=None, dest="init_gap")
    p_bound.add_argument("--approx-error", type=float, default=0.0, dest="approx_error")
    p_bound.set_defaults(fn=cmd_bound)

    p_env = sub.add_parser("env", help="export or import environment JSON files")
    env_sub = p_env.add_subparsers(dest="env_command", required=True)
    p_export = env_sub.add_parser("export")
    p_export.add_argument("--env", required=True)
    p_export.add_argument("--gamma", type=float, default=0.9)
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--normalize-features", action="store_true")
    p_export.add_argument("--features", default=None, metavar="FILE")
    p_export.set_defaults(fn=cmd_env)
    p_import = env_sub.add_parser("import")
    p_import.add_argument("file")
    p_import.set_defaults(fn=cmd_env)

    p_fig = sub.add_parser("fig", help="run a named figure preset")
    p_fig.add_argument("name", choices=sorted(FIG_PRESETS))
    p_fig.add_argument("--jobs", type=int, default=1)
    p_fig.add_argument("--out", default=None, help="CSV path (default: <name>.csv)")
    p_fig.set_defaults(fn=cmd_fig)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
