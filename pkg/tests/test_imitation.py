"""
Tests for optimizers, losses, datasets and the training loop
"""

import importlib

import numpy as np
import pytest

from dmpc_core.controller import MpcController
from dmpc_core.envs import GoalCost, LinearDynamics, Pendulum, PendulumParams, QuadraticCost, pendulum_goal_cost
from dmpc_core.exceptions import ConfigError, NoConvergedSamples, ParameterError, TrainingDiverged
from dmpc_core.imitation import (
    CURVE_COLUMNS,
    AdamState,
    Optimizer,
    RmspropState,
    TrainConfig,
    active_groups,
    adam_step,
    gaussian_sampler,
    imitation_loss,
    make_dataset,
    model_loss,
    rmsprop_step,
    sysid_loss,
    train,
    transitions,
)
from dmpc_core.imitation.train import _check_finite, _improves, trained_groups
from dmpc_core.solvers.mpc import SolverSettings
from dmpc_core.utils import finite_difference, max_relative_error

from conftest import TIGHT, random_pd

N_STATE, N_CTRL, HORIZON = 3, 2, 5

# the package re-exports the train function under the module name
train_module = importlib.import_module("dmpc_core.imitation.train")


def _linear_controller(rng, settings=TIGHT, bound=np.inf):
    A = np.eye(N_STATE) + 0.1 * rng.standard_normal((N_STATE, N_STATE))
    B = rng.standard_normal((N_STATE, N_CTRL))
    cost = QuadraticCost(random_pd(N_STATE + N_CTRL, rng), 0.1 * rng.standard_normal(N_STATE + N_CTRL))
    return MpcController(LinearDynamics(A, B), cost, HORIZON, -bound, bound, settings)


def _perturbed(ctrl, rng, scale=0.1):
    theta = ctrl.get_params(["dx"])
    return ctrl.with_params(["dx"], theta + scale * rng.standard_normal(theta.shape))


@pytest.fixture
def expert(rng):
    return _linear_controller(rng)


@pytest.fixture
def dataset(expert):
    return make_dataset(expert, gaussian_sampler(N_STATE), (4, 2, 2), seed=7)


class TestOptimizers:
    def test_rmsprop_first_step(self):
        theta, state = rmsprop_step(np.zeros(1), np.ones(1), RmspropState(np.zeros(1)), 0.01, 0.5)
        np.testing.assert_allclose(state.acc, [0.5])
        np.testing.assert_allclose(theta, [-0.01 / np.sqrt(0.5 + 1e-8)], rtol=1e-14)

    def test_adam_two_steps(self):
        state = AdamState(np.zeros(1), np.zeros(1), 0)
        theta, state = adam_step(np.zeros(1), np.ones(1), state, lr=0.1)
        np.testing.assert_allclose(theta, [-0.1 / (1.0 + 1e-8)], rtol=1e-12)
        theta, state = adam_step(theta, np.ones(1), state, lr=0.1)
        np.testing.assert_allclose(theta, [-0.2 / (1.0 + 1e-8)], rtol=1e-10)
        assert state.step == 2

    def test_optimizer_keeps_state(self):
        opt = Optimizer("rmsprop", 0.01, 0.5, 1)
        opt.step(np.zeros(1), np.ones(1))
        opt.step(np.zeros(1), np.ones(1))
        np.testing.assert_allclose(opt.state.acc, [0.75])

    def test_optimizer_unknown_name(self):
        with pytest.raises(ConfigError):
            Optimizer("sgd", 0.1, 0.5, 1)


class TestLosses:
    def test_model_loss(self):
        assert model_loss(np.array([1.0]), np.array([3.0])) == 4.0
        assert model_loss(np.zeros(0), np.zeros(0)) == 0.0
        with pytest.raises(ParameterError):
            model_loss(np.zeros(2), np.zeros(3))

    def test_sysid_loss_zero_at_truth(self, expert, dataset):
        loss, grad = sysid_loss(expert.dynamics, transitions(dataset.train))
        assert loss == 0.0
        assert not grad.any()

    def test_sysid_gradient_matches_finite_differences(self, rng, expert, dataset):
        batch = transitions(dataset.train)
        moved = _perturbed(expert, rng).dynamics
        _, grad = sysid_loss(moved, batch)
        numeric = finite_difference(lambda th: sysid_loss(moved.with_params(th), batch)[0], moved.params, 1e-6)
        assert max_relative_error(grad, numeric, 1e-6) <= 1e-5

    def test_sysid_pendulum_gradient(self, rng):
        truth = Pendulum(PendulumParams())
        X = np.stack([[np.cos(a), np.sin(a), w] for a, w in rng.uniform(-1.0, 1.0, size=(6, 2))])
        U = rng.uniform(-1.0, 1.0, size=(6, 1))
        Xn = np.stack([truth(x, u) for x, u in zip(X, U)])
        model = Pendulum(PendulumParams(mass=1.2, length=0.9, gravity=11.0))
        _, grad = sysid_loss(model, (X, U, Xn))
        numeric = finite_difference(lambda th: sysid_loss(model.with_params(th), (X, U, Xn))[0], model.params, 1e-6)
        assert max_relative_error(grad, numeric, 1e-6) <= 1e-4

    def test_transitions_shapes(self, dataset):
        X, U, Xn = transitions(dataset.train)
        assert X.shape == (4 * (HORIZON - 1), N_STATE)
        assert U.shape == (4 * (HORIZON - 1), N_CTRL)
        np.testing.assert_array_equal(Xn[0], dataset.train[0].traj.x[1])

    def test_imitation_loss_zero_for_expert(self, expert, dataset):
        result = imitation_loss(expert, dataset.train)
        assert result.loss == 0.0
        assert result.n_used == 4 and result.n_dropped == 0
        assert not result.grad.any()

    def test_imitation_gradient_matches_finite_differences(self, rng, expert, dataset):
        learner = _perturbed(expert, rng)
        result = imitation_loss(learner, dataset.train, groups=["dx"])
        theta = learner.get_params(["dx"])
        numeric = finite_difference(
            lambda th: imitation_loss(learner.with_params(["dx"], th), dataset.train, with_grad=False).loss,
            theta, 1e-6,
        )
        floor = max(1e-6, 1e-3 * np.max(np.abs(numeric)))
        assert max_relative_error(result.grad, numeric, floor) <= 1e-4

    def test_imitation_controls_only(self, rng, expert, dataset):
        learner = _perturbed(expert, rng)
        result = imitation_loss(learner, dataset.train, controls_only=True, with_grad=False)
        expected = np.mean([np.sum((learner.solve(r.x_init)[1].traj.u - r.traj.u) ** 2) for r in dataset.train])
        assert result.loss == pytest.approx(expected, rel=1e-12)
        assert result.grad is None
        assert result.loss <= imitation_loss(learner, dataset.train, with_grad=False).loss

    def test_imitation_workers_do_not_change_result(self, rng, expert, dataset):
        learner = _perturbed(expert, rng)
        serial = imitation_loss(learner, dataset.train, workers=1)
        threaded = imitation_loss(learner, dataset.train, workers=3)
        assert serial.loss == threaded.loss
        np.testing.assert_array_equal(serial.grad, threaded.grad)

    def test_imitation_all_dropped_raises(self, rng, expert, dataset):
        learner = MpcController(expert.dynamics, expert.cost, HORIZON, settings=SolverSettings(max_iters=1))
        with pytest.raises(NoConvergedSamples):
            imitation_loss(learner, dataset.train)


class TestDataset:
    def test_dataset_sizes(self, dataset):
        assert dataset.sizes == (4, 2, 2)

    def test_dataset_deterministic(self, expert, dataset):
        again = make_dataset(expert, gaussian_sampler(N_STATE), (4, 2, 2), seed=7)
        for a, b in zip(dataset.train + dataset.val + dataset.test, again.train + again.val + again.test):
            np.testing.assert_array_equal(a.x_init, b.x_init)
            np.testing.assert_array_equal(a.traj.tau, b.traj.tau)

    def test_dataset_seed_changes_states(self, expert, dataset):
        other = make_dataset(expert, gaussian_sampler(N_STATE), (4, 2, 2), seed=8)
        assert not np.array_equal(dataset.train[0].x_init, other.train[0].x_init)

    def test_dataset_expert_never_converges(self, expert):
        stubborn = MpcController(expert.dynamics, expert.cost, HORIZON, settings=SolverSettings(max_iters=1))
        with pytest.raises(NoConvergedSamples):
            make_dataset(stubborn, gaussian_sampler(N_STATE), (2, 1, 1), seed=0)


class TestControllerGroups:
    def test_goal_cost_groups(self):
        ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 10, -2.0, 2.0)
        assert ctrl.param_groups() == ("cost", "cost.goal", "cost.w", "dx")
        np.testing.assert_array_equal(ctrl.get_params(["cost.w"]), [1.0, 1.0, 0.3, 0.1])
        np.testing.assert_array_equal(ctrl.get_params(["dx"]), [1.0, 1.0, 10.0])

    def test_with_params_replaces_only_named_groups(self):
        ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 10, -2.0, 2.0)
        moved = ctrl.with_params(["cost.goal"], np.zeros(4))
        np.testing.assert_array_equal(moved.cost.goal, np.zeros(4))
        np.testing.assert_array_equal(moved.cost.weights, ctrl.cost.weights)
        np.testing.assert_array_equal(moved.dynamics.params, ctrl.dynamics.params)

    def test_group_gradient_restricts(self):
        ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 10, -2.0, 2.0)
        np.testing.assert_array_equal(ctrl.group_gradient(np.arange(11.0), ["dx"]), [8.0, 9.0, 10.0])

    def test_parameter_errors(self):
        ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 10, -2.0, 2.0)
        with pytest.raises(ParameterError):
            ctrl.with_params(["dx"], np.ones(2))
        with pytest.raises(ParameterError):
            ctrl.get_params(["cost.q"])

    def test_quadratic_cost_has_no_goal_groups(self, expert):
        assert expert.param_groups() == ("cost", "dx")


class TestTrainConfig:
    @pytest.mark.parametrize("kwargs", [
        {"method": "mpc.everything"},
        {"optimizer": "sgd"},
        {"learning_rate": 0.0},
        {"decay": 1.0},
        {"batch_size": 0},
        {"workers": 0},
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_controls_only_defaults(self):
        assert not TrainConfig(method="lqr.dx").compare_controls_only
        assert TrainConfig(method="mpc.dx").compare_controls_only
        assert not TrainConfig(method="mpc.dx", controls_only=False).compare_controls_only

    def test_cost_groups_alternate(self):
        ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 10, -2.0, 2.0)
        config = TrainConfig(method="mpc.cost", alternation_period=2)
        phases = [active_groups(config, ctrl, epoch) for epoch in range(5)]
        assert phases == [("cost.w",), ("cost.w",), ("cost.goal",), ("cost.goal",), ("cost.w",)]
        both = TrainConfig(method="mpc.cost.dx", alternation_period=2)
        assert active_groups(both, ctrl, 2) == ("cost.goal", "dx")
        assert trained_groups(both, ctrl) == ("cost.w", "cost.goal", "dx")

    def test_dynamics_methods_train_dynamics(self, expert):
        for method in ("sysid", "lqr.dx", "mpc.dx"):
            assert active_groups(TrainConfig(method=method), expert, 3) == ("dx",)

    def test_quadratic_cost_trains_whole_cost(self, expert):
        assert active_groups(TrainConfig(method="mpc.cost"), expert, 0) == ("cost",)


class TestTrain:
    def test_train_curves(self, rng, expert, dataset):
        rows = []
        config = TrainConfig(method="lqr.dx", batch_size=2, epochs=2)
        result = train(config, dataset, _perturbed(expert, rng), expert, on_epoch=rows.append)
        assert [row["epoch"] for row in result.curves] == [1, 2]
        assert rows == result.curves
        assert set(result.curves[0]) == set(CURVE_COLUMNS)
        assert 0 <= result.best_epoch <= 2
        assert result.best_params.shape == (N_STATE * (N_STATE + N_CTRL),)
        assert result.initial_losses["epoch"] == 0

    def test_train_deterministic(self, rng, expert, dataset):
        learner = _perturbed(expert, rng)
        config = TrainConfig(method="mpc.dx", batch_size=2, epochs=2, seed=3)
        first = train(config, dataset, learner, expert)
        second = train(config, dataset, learner, expert)
        assert first.curves == second.curves
        np.testing.assert_array_equal(first.best_params, second.best_params)

    def test_train_sysid_reaches_lower_model_loss(self, rng, expert, dataset):
        learner = _perturbed(expert, rng)
        config = TrainConfig(method="sysid", optimizer="adam", learning_rate=1e-2, batch_size=4, epochs=20)
        result = train(config, dataset, learner, expert)
        assert result.curves[-1]["sysid_loss"] < result.initial_losses["sysid_loss"]

    def test_train_reports_dropped_evaluation_samples(self, rng, expert, dataset, monkeypatch):
        real_loss = train_module.imitation_loss

        def lossy(learner, records, *args, with_grad=True, **kwargs):
            result = real_loss(learner, records, *args, with_grad=with_grad, **kwargs)
            # evaluation passes report one unconverged sample
            return result if with_grad else result._replace(n_dropped=1)

        monkeypatch.setattr(train_module, "imitation_loss", lossy)
        result = train(TrainConfig(method="mpc.dx", batch_size=2, epochs=2), dataset, _perturbed(expert, rng), expert)
        assert result.initial_losses["val_dropped"] == 1
        assert all(row["val_dropped"] == 1 and row["test_dropped"] == 1 for row in result.curves)

    def test_best_epoch_prefers_fewer_dropped_samples(self):
        best = {"val_loss": 0.5, "val_dropped": 0}
        assert not _improves({"val_loss": 0.1, "val_dropped": 2}, best)
        assert _improves({"val_loss": 0.4, "val_dropped": 0}, best)
        assert _improves({"val_loss": 0.9, "val_dropped": 0}, {"val_loss": 0.1, "val_dropped": 1})
        assert _improves({"val_loss": 0.9, "val_dropped": 0}, {"val_loss": float("inf"), "val_dropped": 2})

    def test_train_batch_larger_than_dataset(self, rng, expert, dataset):
        with pytest.raises(ConfigError):
            train(TrainConfig(batch_size=5), dataset, expert, expert)

    def test_non_finite_values_diverge(self):
        with pytest.raises(TrainingDiverged) as info:
            _check_finite(3, loss=np.nan, grad=np.ones(2))
        assert info.value.epoch == 3
        assert info.value.diagnostics["grad"] == [1.0, 1.0]

    def test_goal_cost_learner_trains_weights(self):
        cost = GoalCost([1.0, 1.0, 0.3, 0.1], [1.0, 0.0, 0.0, 0.0])
        ctrl = MpcController(Pendulum(PendulumParams()), cost, 5, -2.0, 2.0)
        assert trained_groups(TrainConfig(method="mpc.cost"), ctrl) == ("cost.w", "cost.goal")
