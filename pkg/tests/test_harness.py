"""Experiment harness, CSV contract, sweep, CLI."""

import json

import numpy as np
import pytest

from targetq import (
    CSV_HEADER,
    ExperimentSpec,
    SweepRung,
    build_environment,
    logs_to_csv,
    run_experiment,
    sweep_experiment,
    bound_inputs_for,
    two_state,
)
from targetq.cli import main
from targetq.envs import save_environment
from targetq.features import FeatureMap, save_features
from targetq.harness import FIG_PRESETS, run_fig, sweep_env, write_csv


def small_spec(**overrides):
    base = dict(name="t", env="two_state", algo="target_trunc", gamma=0.9,
                T=3, K=50, alpha=1e-3, n_seeds=2, base_seed=0)
    base.update(overrides)
    return ExperimentSpec(**base)


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(algo="dqn")
    with pytest.raises(ValueError):
        small_spec(T=0)
    with pytest.raises(ValueError):
        small_spec(n_seeds=0)


def test_spec_json_roundtrip():
    spec = small_spec(r=12.5, theta0=1.0, env_params={"n_states": 4})
    back = ExperimentSpec.from_json(spec.to_json())
    assert back == spec


def test_spec_from_json_nested_cfg():
    payload = {
        "env": "two_state", "algo": "target", "gamma": 0.9,
        "cfg": {"T": 4, "K": 10, "alpha": 0.01, "seed": 99, "log_every": 2},
    }
    spec = ExperimentSpec.from_json(json.dumps(payload))
    assert spec.name == "spec"
    assert (spec.T, spec.K, spec.alpha, spec.log_every) == (4, 10, 0.01, 2)
    assert spec.base_seed == 0  # the nested per-run seed is dropped


def test_build_environment_names(tmp_path):
    assert build_environment(small_spec(env="two_state")).name == "two_state"
    assert build_environment(small_spec(env="baird", gamma=0.99)).name == "baird"
    rnd = build_environment(small_spec(
        env="random", gamma=0.8, env_params={"n_states": 4, "n_actions": 3, "mdp_seed": 2}))
    assert rnd.name == "random-4x3-2"
    assert rnd.mdp.gamma == 0.8
    path = tmp_path / "saved.json"
    save_environment(two_state(), str(path))
    assert build_environment(small_spec(env=str(path))).name == "two_state"
    with pytest.raises(ValueError):
        build_environment(small_spec(env="atari"))


def test_build_environment_feature_overrides(tmp_path):
    fpath = tmp_path / "phi.json"
    save_features(FeatureMap(phi=np.eye(4)), str(fpath))
    env = build_environment(small_spec(features_path=str(fpath)))
    np.testing.assert_array_equal(env.features.phi, np.eye(4))
    norm = build_environment(small_spec(normalize_features=True))
    assert norm.features.normalized
    np.testing.assert_allclose(norm.features.phi.ravel(), [0.25, 0.5, 0.5, 1.0])


def test_run_experiment_assigns_seeds():
    logs = run_experiment(small_spec(n_seeds=3, base_seed=5))
    assert [log.seed for log in logs] == [5, 6, 7]
    assert all(log.algo == "target_trunc" for log in logs)


def test_parallel_jobs_identical_output():
    spec = small_spec(n_seeds=4, T=4, K=200)
    serial = logs_to_csv(run_experiment(spec, jobs=1))
    threaded = logs_to_csv(run_experiment(spec, jobs=3))
    assert serial == threaded


def test_csv_contract():
    spec = small_spec(n_seeds=2, base_seed=3, T=4, K=25, log_every=2)
    logs = run_experiment(spec)
    text = logs_to_csv(logs)
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER == "run_id,env,algo,seed,t,samples,sup_error,theta_norm,diverged"
    rows = [line.split(",") for line in lines[1:]]
    # sorted by (seed, t)
    keys = [(int(r[3]), int(r[4])) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        assert r[1] == "two_state" and r[2] == "target_trunc"
        assert r[8] in ("0", "1")
    # float fields are repr() output and parse back exactly
    first = rows[0]
    rec = logs[0].records[0]
    assert float(first[6]) == rec.sup_error
    assert float(first[7]) == rec.theta_norm


def test_csv_deterministic_across_calls():
    spec = small_spec(n_seeds=3, T=5, K=100)
    a = logs_to_csv(run_experiment(spec))
    b = logs_to_csv(run_experiment(spec))
    assert a == b


def test_write_csv_newlines(tmp_path):
    path = tmp_path / "out.csv"
    write_csv("a,b\n1,2\n", str(path))
    raw = path.read_bytes()
    assert raw == b"a,b\n1,2\n"


def test_fig_presets_cover_both_envs_and_all_algos():
    assert sorted(FIG_PRESETS) == ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"]
    envs = {spec.env for spec in FIG_PRESETS.values()}
    assert envs == {"baird", "two_state"}
    algos = {spec.algo for spec in FIG_PRESETS.values()}
    assert algos == {"semi_gradient", "target", "target_trunc"}
    for spec in FIG_PRESETS.values():
        assert spec.n_seeds >= 3


def test_run_fig_unknown_name():
    with pytest.raises(ValueError):
        run_fig("fig99")


def test_sweep_unattained_marker():
    env = sweep_env()
    ladder = [SweepRung(T=5, K=50, alpha=0.1)]
    text, slope = sweep_experiment(env, [1e-9], ladder, n_seeds=2)
    lines = text.strip().split("\n")
    assert lines[0] == "epsilon,samples,achieved_error"
    assert lines[1] == "1e-09,-1,nan"
    assert lines[2].startswith("# loglog_slope=")
    assert np.isnan(slope)


def test_sweep_attains_loose_target():
    env = sweep_env()
    ladder = [SweepRung(T=30, K=400 * 2**j, alpha=0.16 / 2**j) for j in range(3)]
    text, slope = sweep_experiment(env, [0.4], ladder, n_seeds=4)
    lines = text.strip().split("\n")
    assert len(lines) == 3  # header, one target, footer
    eps, samples, err = lines[1].split(",")
    assert eps == "0.4"
    assert int(samples) > 0
    assert float(err) <= 0.4
    assert np.isnan(slope)  # a single attained point fits no slope


def test_sweep_epsilons_walk_large_to_small():
    env = sweep_env()
    ladder = [SweepRung(T=30, K=400 * 2**j, alpha=0.16 / 2**j) for j in range(4)]
    text, _ = sweep_experiment(env, [0.2, 0.4], ladder, n_seeds=4)
    lines = text.strip().split("\n")[1:-1]
    assert lines[0].startswith("0.4,")
    assert lines[1].startswith("0.2,")
    s04 = int(lines[0].split(",")[1])
    s02 = int(lines[1].split(",")[1])
    if s02 != -1:
        assert s02 >= s04  # tighter target never needs fewer samples


def test_bound_inputs_two_state():
    env = two_state()
    inputs = bound_inputs_for(env, alpha=1e-3, T=50, K=10_000, init_gap=40.0)
    assert inputs.gamma == 0.9
    assert inputs.lambda_min == pytest.approx(6.25)
    assert inputs.t_mix == 1  # the uniform-behavior chain mixes in one step
    assert inputs.inner_steps == 10_000 and inputs.outer_steps == 50
    assert inputs.init_gap == 40.0


# ---- CLI ----


def test_cli_run_to_file(tmp_path):
    out = tmp_path / "runs.csv"
    code = main(["run", "--env", "two_state", "--algo", "target_trunc",
                 "--T", "3", "--K", "50", "--alpha", "1e-3",
                 "--seeds", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 3


def test_cli_run_stdout(capsys):
    code = main(["run", "--T", "2", "--K", "20", "--alpha", "1e-3"])
    assert code == 0
    captured = capsys.readouterr().out
    assert captured.startswith(CSV_HEADER)


def test_cli_run_spec_file(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(small_spec(T=2, K=10).to_json())
    assert main(["run", "--spec", str(spec_path)]) == 0
    assert capsys.readouterr().out.startswith(CSV_HEADER)


def test_cli_run_unknown_env(tmp_path, capsys):
    code = main(["run", "--env", "nope", "--T", "1", "--K", "1", "--alpha", "0.1"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_seed_env_var(tmp_path, monkeypatch):
    out = tmp_path / "runs.csv"
    monkeypatch.setenv("DTL_SEED", "7")
    main(["run", "--T", "2", "--K", "10", "--alpha", "1e-3", "--out", str(out)])
    rows = out.read_text().strip().split("\n")[1:]
    assert all(r.split(",")[3] == "7" for r in rows)


def test_cli_bound_explicit_inputs(capsys):
    code = main(["bound", "--gamma", "0.9", "--alpha", "4.8e-4",
                 "--T", "50", "--K", "10000",
                 "--lambda-min", "6.25", "--t-mix", "1", "--init-gap", "40"])
    assert code == 0
    out = capsys.readouterr().out
    for label in ("gamma", "lambda_min", "e1_decay", "e2_tail", "e3_noise",
                  "e4_approx", "total", "stepsize_ok"):
        assert label in out
    assert "stepsize_ok" in out and "True" in out


def test_cli_bound_warns_above_limit(capsys):
    main(["bound", "--gamma", "0.9", "--alpha", "0.01", "--T", "10", "--K", "100",
          "--lambda-min", "6.25", "--t-mix", "1", "--init-gap", "40"])
    out = capsys.readouterr().out
    assert "False" in out
    assert "warning: alpha exceeds" in out


def test_cli_bound_from_env(capsys):
    code = main(["bound", "--env", "two_state", "--gamma", "0.9",
                 "--alpha", "1e-3", "--T", "50", "--K", "10000"])
    assert code == 0
    out = capsys.readouterr().out
    values = dict(line.split(None, 1) for line in out.strip().split("\n") if " " in line)
    assert values["lambda_min"] == "6.25"
    assert values["t_mix"] == "1"
    # init_gap defaults to sup |Q*|, which is 40 up to the solver tolerance
    assert float(values["init_gap"]) == pytest.approx(40.0, abs=1e-6)


def test_cli_bound_missing_inputs(capsys):
    code = main(["bound", "--alpha", "1e-3", "--T", "5", "--K", "100"])
    assert code == 2


def test_cli_env_export_import(tmp_path, capsys):
    path = tmp_path / "ts.json"
    assert main(["env", "export", "--env", "two_state", "--out", str(path)]) == 0
    assert path.exists()
    capsys.readouterr()
    assert main(["env", "import", str(path)]) == 0
    out = capsys.readouterr().out
    assert "two_state" in out and "lambda_min" in out and "6.25" in out


def test_cli_fig_writes_default_name(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["fig", "fig4"]) == 0
    text = (tmp_path / "fig4.csv").read_text()
    assert text.startswith(CSV_HEADER)
    # the no-truncation preset must actually record divergence
    assert any(line.endswith(",1") for line in text.strip().split("\n")[1:])


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
