"""
Tests for experiment configs, result files, runners and the CLI
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from dmpc_core.cli import main
from dmpc_core.envs import Pendulum, PendulumParams
from dmpc_core.envs.pendulum import _angular_acceleration
from dmpc_core.exceptions import ConfigError, NoConvergedSamples
from dmpc_core.experiments import ExperimentConfig, ResultsWriter, bench_backward, gradcheck, run_experiment
from dmpc_core.experiments import runner as runner_module
from dmpc_core.experiments.bench import BENCH_COLUMNS
from dmpc_core.experiments.results import SCHEMA_VERSION, dump_json
from dmpc_core.experiments.runner import build_expert, build_learner, resolve_output_dir
from dmpc_core.experiments.config import EnvConfig
from dmpc_core.imitation import CURVE_COLUMNS, TrainConfig, gaussian_sampler, make_dataset, transitions

TINY_LQR = {
    "experiment": "lqr-imitate",
    "env": {"name": "linear", "n_state": 2, "n_ctrl": 1, "horizon": 5, "u_bound": 1.0},
    "train": {"epochs": 2, "batch_size": 2},
    "train_sizes": [4],
    "dataset": {"val_size": 2, "test_size": 2},
    "trials": 1,
    "seed": 3,
}


def _without_timings(value):
    if isinstance(value, dict):
        return {k: _without_timings(v) for k, v in value.items() if k != "wall_clock_seconds"}
    return value


class TestExperimentConfig:
    def test_round_trip(self):
        config = ExperimentConfig.from_dict(TINY_LQR)
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_defaults(self):
        config = ExperimentConfig.from_dict({"experiment": "gradcheck"})
        assert config.env.horizon == 20
        assert config.train.optimizer == "rmsprop"
        assert config.gradcheck.env == "pendulum"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "gradcheck", "epochs": 3})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "gradcheck", "env": {"name": "pendulum", "mass": 2.0}})

    def test_missing_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"seed": 1})

    @pytest.mark.parametrize("data", [
        {"experiment": "swing-up"},
        {"experiment": "mpc-imitate", "methods": ["mpc.everything"]},
        {"experiment": "mpc-imitate", "env": {"name": "acrobot"}},
        {"experiment": "mpc-imitate", "train_sizes": []},
        {"experiment": "mpc-imitate", "train": {"learning_rate": -1.0}},
    ])
    def test_invalid_values(self, data):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_from_file_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.json")

    def test_overrides(self):
        config = ExperimentConfig.from_dict(TINY_LQR).with_overrides(output_dir="out", seed=9)
        assert config.output_dir == "out" and config.seed == 9


class TestResultsWriter:
    def test_curve_csv_header_and_line_endings(self, tmp_path):
        with ResultsWriter(tmp_path) as writer:
            curve = writer.curve("run.csv")
            curve({"epoch": 1, "train_loss": 0.5, "val_loss": 0.25})
            curve({"epoch": 2, "train_loss": 0.4, "val_loss": 0.2})
        raw = (tmp_path / "run.csv").read_bytes()
        assert b"\r\n" not in raw
        lines = raw.decode("utf-8").splitlines()
        assert lines[0] == ",".join(CURVE_COLUMNS)
        assert len(lines) == 3 and curve.rows == 2
        frame = pd.read_csv(tmp_path / "run.csv")
        assert frame["epoch"].tolist() == [1, 2]
        assert frame["test_loss"].isna().all()

    def test_path_outside_output_dir_refused(self, tmp_path):
        writer = ResultsWriter(tmp_path / "out")
        with pytest.raises(ConfigError):
            writer.path("../escape.csv")

    def test_summary_schema_and_sorted_keys(self, tmp_path):
        with ResultsWriter(tmp_path) as writer:
            path = writer.write_summary({"zeta": 1, "alpha": float("nan"), "params": np.array([1.0, 2.0])})
        text = path.read_text(encoding="utf-8")
        data = json.loads(text)
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["alpha"] is None
        assert data["params"] == [1.0, 2.0]
        assert list(data) == sorted(data)
        assert text.endswith("\n")

    def test_dump_json_numpy_scalars(self):
        assert json.loads(dump_json({"n": np.int64(3), "x": np.float64(np.inf)})) == {"n": 3, "x": None}


class TestOutputDir:
    def test_precedence(self, monkeypatch, tmp_path):
        config = ExperimentConfig.from_dict({"experiment": "gradcheck", "output_dir": "from_config"})
        monkeypatch.setenv("DMPC_OUTPUT_DIR", str(tmp_path / "from_env"))
        assert resolve_output_dir(config, tmp_path / "explicit") == tmp_path / "explicit"
        assert resolve_output_dir(config) == tmp_path / "from_env"
        monkeypatch.delenv("DMPC_OUTPUT_DIR")
        assert str(resolve_output_dir(config)) == "from_config"
        bare = ExperimentConfig.from_dict({"experiment": "gradcheck"})
        assert resolve_output_dir(bare).parts[-2:] == ("results", "gradcheck")


class TestBuilders:
    def test_learner_class_pendulum_drops_damping_and_wind(self):
        env = EnvConfig(name="pendulum", realizable=False)
        expert = build_expert(env, np.random.default_rng(0))
        assert expert.dynamics.physical.damping == 0.1 and expert.dynamics.physical.wind == 0.5
        learner = build_learner(expert, env, "mpc.dx", np.random.default_rng(1))
        assert learner.dynamics.physical.realizable
        ratio = learner.dynamics.params / expert.dynamics.params
        assert np.all((ratio >= 0.7) & (ratio <= 1.3))
        np.testing.assert_array_equal(learner.cost.params, expert.cost.params)

    def test_cost_learner_keeps_dynamics(self):
        env = EnvConfig(name="pendulum")
        expert = build_expert(env, np.random.default_rng(0))
        learner = build_learner(expert, env, "mpc.cost", np.random.default_rng(1))
        np.testing.assert_array_equal(learner.dynamics.params, expert.dynamics.params)
        assert not np.array_equal(learner.cost.params, expert.cost.params)

    def test_cartpole_has_no_unrealizable_expert(self):
        with pytest.raises(ConfigError):
            build_expert(EnvConfig(name="cartpole", realizable=False), np.random.default_rng(0))


class TestRunExperiment:
    def test_lqr_imitate_bundle(self, tmp_path):
        summary = run_experiment(ExperimentConfig.from_dict(TINY_LQR), tmp_path)
        assert summary["status"] == "ok"
        assert (tmp_path / "config.json").exists()
        written = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert written["schema_version"] == SCHEMA_VERSION
        run = written["runs"]["lqr.dx_trial0"]
        assert run["epochs"] == 2 and run["train_size"] == 4
        curve = pd.read_csv(tmp_path / "lqr.dx_trial0.csv")
        assert curve["epoch"].tolist() == [1, 2]

    def test_lqr_imitate_deterministic(self, tmp_path):
        config = ExperimentConfig.from_dict(TINY_LQR)
        first = run_experiment(config, tmp_path / "a")
        second = run_experiment(config, tmp_path / "b")
        assert dump_json(_without_timings(first)) == dump_json(_without_timings(second))
        name = "lqr.dx_trial0.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override_recorded(self, tmp_path):
        summary = run_experiment(ExperimentConfig.from_dict(TINY_LQR), tmp_path, seed=11)
        assert summary["seed"] == 11
        assert json.loads((tmp_path / "config.json").read_text(encoding="utf-8"))["seed"] == 11

    def test_wrong_env_recorded_as_failed(self, tmp_path):
        data = dict(TINY_LQR, env={"name": "pendulum"})
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig.from_dict(data), tmp_path)
        written = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert written["status"] == "failed"

    def test_gradcheck_experiment(self, tmp_path):
        config = ExperimentConfig.from_dict({"experiment": "gradcheck", "gradcheck": {"env": "lqr"}})
        summary = run_experiment(config, tmp_path)
        assert summary["passed"] is True

    def test_unconverged_test_set_scored_as_failed(self, monkeypatch):
        env = EnvConfig(name="linear", horizon=5, n_state=2, n_ctrl=1)
        expert = build_expert(env, np.random.default_rng(0))
        dataset = make_dataset(expert, gaussian_sampler(2), (2, 1, 2), seed=0)

        def no_converged(*args, **kwargs):
            raise NoConvergedSamples("all 2 learner solves failed to converge")

        monkeypatch.setattr(runner_module, "imitation_loss", no_converged)
        scores = runner_module._test_scores(expert, dataset, transitions(dataset.test), TrainConfig(method="mpc.dx"))
        assert scores["status"] == "failed"
        assert np.isnan(scores["test_imitation_loss"])
        assert scores["test_dropped"] == 2
        assert np.isfinite(scores["test_sysid_loss"])

    def test_sysid_compare_tie_is_not_better_imitation(self, tmp_path, monkeypatch):
        def fake_run(writer, name, config, dataset, learner, expert):
            return {"status": "ok", "method": config.method, "_learner": learner}

        def fake_scores(trained, dataset, test_transitions, config):
            return {"status": "ok", "test_sysid_loss": 0.5, "test_imitation_loss": 1.0}

        monkeypatch.setattr(runner_module, "_train_run", fake_run)
        monkeypatch.setattr(runner_module, "_test_scores", fake_scores)
        config = ExperimentConfig.from_dict({
            "experiment": "sysid-compare",
            "env": {"name": "pendulum", "horizon": 5, "realizable": False},
            "train": {"epochs": 1, "batch_size": 1},
            "train_sizes": [1],
            "dataset": {"val_size": 1, "test_size": 1},
            "trials": 1,
        })
        scores = run_experiment(config, tmp_path)["comparison"]["trial0"]
        assert scores["status"] == "ok"
        assert scores["sysid_fits_transitions_better"]
        assert not scores["imitation_imitates_better"]

    def test_sysid_compare_failed_trial_flags_false(self, tmp_path, monkeypatch):
        def fake_run(writer, name, config, dataset, learner, expert):
            return {"status": "ok", "method": config.method, "_learner": learner}

        def fake_scores(trained, dataset, test_transitions, config):
            if config.method == "mpc.dx":
                return {"status": "failed", "test_sysid_loss": 0.1, "test_imitation_loss": float("nan")}
            return {"status": "ok", "test_sysid_loss": 0.5, "test_imitation_loss": 1.0}

        monkeypatch.setattr(runner_module, "_train_run", fake_run)
        monkeypatch.setattr(runner_module, "_test_scores", fake_scores)
        config = ExperimentConfig.from_dict({
            "experiment": "sysid-compare",
            "env": {"name": "pendulum", "horizon": 5, "realizable": False},
            "train": {"epochs": 1, "batch_size": 1},
            "train_sizes": [1],
            "dataset": {"val_size": 1, "test_size": 1},
            "trials": 1,
        })
        summary = run_experiment(config, tmp_path)
        scores = summary["comparison"]["trial0"]
        assert summary["status"] == "ok"
        assert scores["status"] == "failed"
        assert not scores["sysid_fits_transitions_better"]
        assert not scores["imitation_imitates_better"]


class TestBenchAndGradcheck:
    def test_bench_table(self):
        table = bench_backward(n_states=[2], caps=[1, 3], trials=1, horizon=4)
        assert list(table.columns) == list(BENCH_COLUMNS)
        assert table["cap"].tolist() == [1, 3]
        assert (table["n_ctrl"] == 1).all()
        assert (table[["forward_mean", "backward_mean"]] > 0).all().all()

    def test_gradcheck_lqr_passes(self):
        report = gradcheck("lqr", instances=2)
        assert report["passed"]
        assert len(report["instances"]) == 2

    def test_gradcheck_unknown_env(self):
        with pytest.raises(ConfigError):
            gradcheck("acrobot")


class TestCli:
    def test_cli_run(self, tmp_path, capsys):
        config = tmp_path / "lqr.json"
        config.write_text(json.dumps(TINY_LQR), encoding="utf-8")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == 0
        assert "lqr-imitate: ok" in capsys.readouterr().out
        assert (tmp_path / "out" / "summary.json").exists()

    def test_cli_run_invalid_config(self, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"experiment": "gradcheck", "colour": "red"}), encoding="utf-8")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_cli_gradcheck_exit_codes(self, capsys):
        assert main(["gradcheck", "--env", "lqr"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
        assert main(["gradcheck", "--env", "lqr", "--tolerance", "1e-30"]) == 1

    def test_cli_bench_writes_table(self, tmp_path, capsys):
        args = ["bench", "--n-states", "2", "--caps", "1,2", "--trials", "1", "--horizon", "4",
                "--out", str(tmp_path)]
        assert main(args) == 0
        assert pd.read_csv(tmp_path / "bench.csv")["cap"].tolist() == [1, 2]

    def test_cli_rejects_bad_caps(self):
        with pytest.raises(SystemExit) as info:
            main(["bench", "--caps", "ten"])
        assert info.value.code == 2


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _config(name, **overrides):
    data = json.loads((CONFIGS / name).read_text(encoding="utf-8"))
    for key, value in overrides.items():
        if isinstance(value, dict):
            data[key] = dict(data.get(key, {}), **value)
        else:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def _identifiable(env, params):
    # mass, length and gravity reach the pendulum only through these two ratios
    if env == "pendulum":
        physical = Pendulum(PendulumParams()).with_params(np.asarray(params)).physical
        return np.array(_angular_acceleration(physical)[:2])
    return np.asarray(params)


@pytest.mark.slow
class TestReproduction:
    def test_mpc_imitate_pendulum_runs(self, tmp_path):
        config = ExperimentConfig.from_dict({
            "experiment": "mpc-imitate",
            "env": {"name": "pendulum", "horizon": 10},
            "train": {"epochs": 10, "batch_size": 8},
            "train_sizes": [16],
            "methods": ["mpc.dx"],
            "dataset": {"val_size": 8, "test_size": 8},
            "trials": 1,
        })
        summary = run_experiment(config, tmp_path)
        run = summary["runs"]["mpc.dx_n16_trial0"]
        assert run["best_val"] <= run["initial"]["val_loss"]
        assert np.isfinite(run["min_test_loss"])
        assert (tmp_path / "mpc.dx_n16_trial0.csv").exists()

    def test_sysid_compare_non_realizable(self, tmp_path):
        config = ExperimentConfig.from_dict({
            "experiment": "sysid-compare",
            "env": {"name": "pendulum", "horizon": 10, "realizable": False},
            "train": {"epochs": 20, "batch_size": 8},
            "train_sizes": [16],
            "dataset": {"val_size": 8, "test_size": 8},
            "trials": 1,
        })
        summary = run_experiment(config, tmp_path)
        scores = summary["comparison"]["trial0"]
        assert scores["status"] == "ok"
        assert scores["sysid"]["test_sysid_loss"] <= scores["mpc.dx"]["test_sysid_loss"]
        assert scores["mpc.dx"]["test_imitation_loss"] < scores["sysid"]["test_imitation_loss"]
        assert scores["sysid_fits_transitions_better"] and scores["imitation_imitates_better"]

    def test_lqr_imitation_some_trial_recovers(self, tmp_path):
        summary = run_experiment(_config("lqr_imitate.json", trials=8), tmp_path)
        runs = summary["runs"]
        assert len(runs) == 8
        assert min(run["best_val"] for run in runs.values()) <= 1e-4

    @pytest.mark.parametrize("env_config", ["pendulum_imitate.json", "cartpole_imitate.json"])
    def test_imitation_and_sysid_reduce_test_loss(self, tmp_path, env_config):
        config = _config(env_config, train_sizes=[100], methods=["sysid", "mpc.dx"], trials=1)
        summary = run_experiment(config, tmp_path)
        for method in ("sysid", "mpc.dx"):
            run = summary["runs"][f"{method}_n100_trial0"]
            assert run["min_test_loss"] * 10.0 <= run["initial"]["test_loss"]

    @pytest.mark.parametrize("env", ["pendulum", "cartpole"])
    def test_realizable_sysid_recovers_parameters(self, tmp_path, env):
        config = _config(f"{env}_imitate.json", train_sizes=[100], methods=["sysid"], trials=1,
                         train={"optimizer": "adam", "learning_rate": 0.05, "epochs": 200},
                         dataset={"val_size": 20, "test_size": 20})
        run = run_experiment(config, tmp_path)["runs"]["sysid_n100_trial0"]
        learned = _identifiable(env, run["best_params"])
        expert = _identifiable(env, run["expert_params"])
        np.testing.assert_allclose(learned, expert, rtol=1e-2)

    def test_sysid_compare_orderings(self, tmp_path):
        summary = run_experiment(_config("sysid_compare.json", trials=2), tmp_path)
        for scores in summary["comparison"].values():
            assert scores["status"] == "ok"
            assert scores["sysid"]["test_sysid_loss"] <= scores["mpc.dx"]["test_sysid_loss"]
            assert scores["mpc.dx"]["test_imitation_loss"] < scores["sysid"]["test_imitation_loss"]

    def test_backward_time_independent_of_forward_cap(self, tmp_path):
        summary = run_experiment(_config("bench.json", bench={"caps": [10, 100]}), tmp_path)
        table = pd.DataFrame(summary["bench"])
        for _, group in table.groupby("n_state"):
            short, long = group.set_index("cap").loc[10], group.set_index("cap").loc[100]
            assert long["forward_mean"] >= 3.0 * short["forward_mean"]
            ratio = long["backward_mean"] / short["backward_mean"]
            assert 0.5 <= ratio <= 2.0
