"""
Experiment runner

Dispatches a parsed ExperimentConfig to one of the experiment kinds and
writes the results bundle:

    lqr-imitate     box-constrained linear controller, learn A and B from
                    full trajectories, several random initializations
    mpc-imitate     pendulum / cartpole, every method x train size x trial
    sysid-compare   non-realizable pendulum, sysid against mpc.dx
    bench-backward  forward/backward timing sweep
    gradcheck       finite-difference check of the backward pass
"""

import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..controller import MpcController
from ..envs.cartpole import Cartpole, CartpoleParams, cartpole_goal_cost, sample_cartpole_state
from ..envs.cost import GoalCost, QuadraticCost
from ..envs.linear import LinearDynamics
from ..envs.pendulum import Pendulum, PendulumParams, pendulum_goal_cost, sample_pendulum_state
from ..exceptions import ConfigError, NoConvergedSamples, TrainingDiverged
from ..imitation.dataset import ImitationDataset, gaussian_sampler, make_dataset, transitions
from ..imitation.losses import imitation_loss, sysid_loss
from ..imitation.train import TrainConfig, train, trained_groups
from ..utils import output_dir_override
from .bench import bench_backward
from .config import EnvConfig, ExperimentConfig
from .gradcheck import gradcheck
from .results import ResultsWriter

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = Path("results")


# ==================== Controllers ====================

def build_expert(env: EnvConfig, rng: np.random.Generator) -> MpcController:
    """Expert controller for an environment; the linear expert draws A, B from rng"""
    if env.name == "pendulum":
        params = PendulumParams()
        if not env.realizable:
            params = replace(params, damping=env.damping, wind=env.wind)
        return MpcController(Pendulum(params), pendulum_goal_cost(), env.horizon, -env.u_bound, env.u_bound)
    if env.name == "cartpole":
        if not env.realizable:
            raise ConfigError("only the pendulum has a non-realizable expert")
        return MpcController(Cartpole(CartpoleParams()), cartpole_goal_cost(), env.horizon,
                             -env.u_bound, env.u_bound)
    n, m = env.n_state, env.n_ctrl
    A, B = _random_linear(n, m, rng)
    cost = QuadraticCost(np.eye(n + m), np.zeros(n + m))
    return MpcController(LinearDynamics(A, B), cost, env.horizon, -env.u_bound, env.u_bound)


def _random_linear(n: int, m: int, rng: np.random.Generator):
    return np.eye(n) + 0.1 * rng.standard_normal((n, n)), rng.standard_normal((n, m))


def build_learner(expert: MpcController, env: EnvConfig, method: str, rng: np.random.Generator) -> MpcController:
    """
    Learner controller for a method.

    Dynamics are re-initialized for methods that learn them (learner-class
    pendulum has no damping or wind); goal costs are perturbed for methods
    that learn the cost. Everything else is copied from the expert.
    """
    p = env.init_perturbation
    dynamics, cost = expert.dynamics, expert.cost

    if method.endswith("dx") or method == "sysid":
        if env.name == "linear":
            dynamics = LinearDynamics(*_random_linear(env.n_state, env.n_ctrl, rng))
        else:
            physical = expert.dynamics.physical
            if env.name == "pendulum":
                physical = replace(physical, damping=0.0, wind=0.0)
            template = type(expert.dynamics)(physical, expert.dynamics.param_names)
            scale = rng.uniform(1.0 - p, 1.0 + p, size=template.params.shape)
            dynamics = template.with_params(template.params * scale)

    if method.startswith("mpc.cost") and isinstance(cost, GoalCost):
        weights = cost.weights * rng.uniform(1.0 - p, 1.0 + p, size=cost.size)
        goal = cost.goal + p * rng.standard_normal(cost.size)
        cost = GoalCost(weights, goal)

    return MpcController(dynamics, cost, env.horizon, expert.u_lower, expert.u_upper,
                         expert.settings, expert.curvature)


def _sampler(env: EnvConfig):
    if env.name == "pendulum":
        return sample_pendulum_state
    if env.name == "cartpole":
        return sample_cartpole_state
    return gaussian_sampler(env.n_state)


def _subset(dataset: ImitationDataset, n_train: int) -> ImitationDataset:
    return replace(dataset, train=dataset.train[:n_train])


# ==================== Training runs ====================

def _train_run(writer: ResultsWriter, name: str, config: TrainConfig, dataset: ImitationDataset,
               learner: MpcController, expert: MpcController) -> Dict[str, Any]:
    curve = writer.curve(f"{name}.csv")
    start = time.monotonic()
    result = train(config, dataset, learner, expert, on_epoch=curve)
    final = result.curves[-1]
    return {
        "status": "ok",
        "method": config.method,
        "train_size": len(dataset.train),
        "epochs": curve.rows,
        "best_epoch": result.best_epoch,
        "best_val": result.best_val,
        "final": final,
        "initial": result.initial_losses,
        "min_test_loss": min(row["test_loss"] for row in result.curves),
        "dropped": result.dropped,
        "best_params": result.best_params,
        "expert_params": expert.get_params(trained_groups(config, expert)),
        "wall_clock_seconds": time.monotonic() - start,
        "_learner": result.learner,
    }


def _public(run: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in run.items() if not k.startswith("_")}


def _run_lqr_imitate(config: ExperimentConfig, writer: ResultsWriter) -> Dict[str, Any]:
    env = config.env
    if env.name != "linear":
        raise ConfigError("lqr-imitate needs env.name = 'linear'")
    expert = build_expert(env, np.random.default_rng(config.seed))
    sizes = (config.train_sizes[0], config.dataset.val_size, config.dataset.test_size)
    dataset = make_dataset(expert, _sampler(env), sizes, config.seed)
    runs = {}
    for trial in range(config.trials):
        train_config = replace(config.train, method="lqr.dx", seed=config.seed + trial,
                               batch_size=min(config.train.batch_size, sizes[0]))
        learner = build_learner(expert, env, "lqr.dx", np.random.default_rng([config.seed, trial]))
        name = f"lqr.dx_trial{trial}"
        runs[name] = _public(_train_run(writer, name, train_config, dataset, learner, expert))
    return {"runs": runs}


def _run_mpc_imitate(config: ExperimentConfig, writer: ResultsWriter) -> Dict[str, Any]:
    env = config.env
    if env.name == "linear":
        raise ConfigError("mpc-imitate needs env.name 'pendulum' or 'cartpole'")
    expert = build_expert(env, np.random.default_rng(config.seed))
    runs = {}
    for trial in range(config.trials):
        sizes = (max(config.train_sizes), config.dataset.val_size, config.dataset.test_size)
        full = make_dataset(expert, _sampler(env), sizes, config.seed + trial)
        for n_train in config.train_sizes:
            dataset = _subset(full, n_train)
            for method in config.methods:
                train_config = replace(config.train, method=method, seed=config.seed + trial,
                                       batch_size=min(config.train.batch_size, n_train))
                learner = build_learner(expert, env, method, np.random.default_rng([config.seed, trial]))
                name = f"{method}_n{n_train}_trial{trial}"
                runs[name] = _public(_train_run(writer, name, train_config, dataset, learner, expert))
    return {"runs": runs}


def _test_scores(trained: MpcController, dataset: ImitationDataset, test_transitions,
                 train_config: TrainConfig) -> Dict[str, Any]:
    scores = {"status": "ok", "test_sysid_loss": sysid_loss(trained.dynamics, test_transitions)[0]}
    try:
        result = imitation_loss(trained, dataset.test, with_grad=False,
                                controls_only=train_config.compare_controls_only)
    except NoConvergedSamples as e:
        logger.warning("%s: test imitation loss unavailable (%s)", train_config.method, e)
        scores.update(status="failed", test_imitation_loss=float("nan"), test_dropped=len(dataset.test))
        return scores
    scores.update(test_imitation_loss=result.loss, test_dropped=result.n_dropped)
    return scores


def _run_sysid_compare(config: ExperimentConfig, writer: ResultsWriter) -> Dict[str, Any]:
    env = config.env
    if env.name != "pendulum":
        raise ConfigError("sysid-compare needs env.name = 'pendulum'")
    if env.realizable:
        logger.warning("sysid-compare with a realizable expert; set env.realizable = false")
    expert = build_expert(env, np.random.default_rng(config.seed))
    runs, comparison = {}, {}
    n_train = max(config.train_sizes)
    for trial in range(config.trials):
        sizes = (n_train, config.dataset.val_size, config.dataset.test_size)
        dataset = make_dataset(expert, _sampler(env), sizes, config.seed + trial)
        test_transitions = transitions(dataset.test)
        scores = {}
        for method in ("sysid", "mpc.dx"):
            train_config = replace(config.train, method=method, seed=config.seed + trial,
                                   batch_size=min(config.train.batch_size, n_train))
            learner = build_learner(expert, env, method, np.random.default_rng([config.seed, trial]))
            name = f"{method}_trial{trial}"
            run = _train_run(writer, name, train_config, dataset, learner, expert)
            scores[method] = _test_scores(run["_learner"], dataset, test_transitions, train_config)
            runs[name] = _public(run)
        ok = all(scores[m]["status"] == "ok" for m in ("sysid", "mpc.dx"))
        scores["status"] = "ok" if ok else "failed"
        scores["sysid_fits_transitions_better"] = ok and bool(
            scores["sysid"]["test_sysid_loss"] <= scores["mpc.dx"]["test_sysid_loss"]
        )
        scores["imitation_imitates_better"] = ok and bool(
            scores["mpc.dx"]["test_imitation_loss"] < scores["sysid"]["test_imitation_loss"]
        )
        comparison[f"trial{trial}"] = scores
    return {"runs": runs, "comparison": comparison}


def _run_bench(config: ExperimentConfig, writer: ResultsWriter) -> Dict[str, Any]:
    bench = config.bench
    table = bench_backward(bench.n_states, bench.caps, bench.trials, bench.horizon, config.seed)
    writer.write_table("bench.csv", table)
    return {"bench": table.to_dict(orient="records")}


def _run_gradcheck(config: ExperimentConfig, writer: ResultsWriter) -> Dict[str, Any]:
    check = config.gradcheck
    report = gradcheck(check.env, check.eps, config.seed, check.instances, check.tolerance)
    return {"gradcheck": report, "passed": report["passed"]}


RUNNERS = {
    "lqr-imitate": _run_lqr_imitate,
    "mpc-imitate": _run_mpc_imitate,
    "sysid-compare": _run_sysid_compare,
    "bench-backward": _run_bench,
    "gradcheck": _run_gradcheck,
}


def resolve_output_dir(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> Path:
    """Explicit argument, then DMPC_OUTPUT_DIR, then the config, then results/<experiment>"""
    if out_dir is not None:
        return Path(out_dir)
    override = output_dir_override()
    if override is not None:
        return override
    if config.output_dir:
        return Path(config.output_dir)
    return DEFAULT_OUTPUT_ROOT / config.experiment


def run_experiment(
    config: Union[str, Path, ExperimentConfig],
    out_dir: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Run one experiment and write its results bundle.

    Args:
        config: Path of a JSON config, or a parsed config
        out_dir: Output directory (overrides DMPC_OUTPUT_DIR and the config)
        seed: Seed override

    Returns:
        The summary dict written to summary.json

    Raises:
        ConfigError: Invalid configuration
        TrainingDiverged: A training run diverged (partial CSVs are kept)

    Example:
        >>> summary = run_experiment("configs/lqr_imitate.json", out_dir="results/lqr", seed=0)
        >>> summary["runs"]["lqr.dx_trial0"]["best_val"]
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_file(config)
    target = resolve_output_dir(config, out_dir)
    config = config.with_overrides(output_dir=target, seed=seed)

    with ResultsWriter(target) as writer:
        writer.write_config(config)
        start = time.monotonic()
        logger.info("running %s (seed %d) into %s", config.experiment, config.seed, target)
        summary: Dict[str, Any] = {"experiment": config.experiment, "seed": config.seed}
        try:
            summary.update(RUNNERS[config.experiment](config, writer))
            summary["status"] = "ok"
        except TrainingDiverged as e:
            summary.update({"status": "diverged", "error": str(e), "epoch": e.epoch,
                            "diagnostics": e.diagnostics})
            raise
        finally:
            summary["wall_clock_seconds"] = time.monotonic() - start
            if "status" not in summary:
                summary["status"] = "failed"
            writer.write_summary(summary)
    return summary
