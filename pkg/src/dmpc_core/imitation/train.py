"""
Training loops for imitation learning and system identification

Methods:
    lqr.dx       dynamics of a box-constrained linear controller, full-trajectory loss
    mpc.dx       dynamics through the MPC fixed point, control-only loss
    mpc.cost     goal-cost weights and target, alternating every period
    mpc.cost.dx  both of the above
    sysid        dynamics by next-state regression on the expert transitions
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..controller import MpcController
from ..envs.cost import GoalCost
from ..exceptions import ConfigError, NoConvergedSamples, ParameterError, TrainingDiverged
from .dataset import ImitationDataset, Record, transitions
from .losses import imitation_loss, model_loss, sysid_loss
from .optim import OPTIMIZERS, Optimizer

logger = logging.getLogger(__name__)

METHODS = ("sysid", "lqr.dx", "mpc.dx", "mpc.cost", "mpc.cost.dx")
CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "test_loss", "model_loss", "sysid_loss",
                 "val_dropped", "test_dropped")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule of one training run"""

    method: str = "mpc.dx"
    optimizer: str = "rmsprop"
    learning_rate: float = 1e-2
    decay: float = 0.5
    batch_size: int = 32
    epochs: int = 50
    alternation_period: int = 10  # epochs between switching goal weights / goal target
    seed: int = 0
    workers: int = 1
    controls_only: Optional[bool] = None  # defaults to True for mpc.* and sysid

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.learning_rate <= 0 or not 0.0 <= self.decay < 1.0:
            raise ConfigError("learning_rate must be positive and decay in [0, 1)")
        if min(self.batch_size, self.epochs, self.alternation_period, self.workers) < 1:
            raise ConfigError("batch_size, epochs, alternation_period and workers must be >= 1")

    @property
    def compare_controls_only(self) -> bool:
        if self.controls_only is not None:
            return self.controls_only
        return self.method != "lqr.dx"

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class TrainResult:
    """Learning curves and the parameters at the best validation loss"""

    curves: List[Dict[str, float]]
    best_params: np.ndarray
    best_epoch: int
    best_val: float
    initial_losses: Dict[str, float]
    dropped: int
    learner: MpcController


def _cost_groups(learner: MpcController) -> Tuple[Tuple[str, ...], ...]:
    if isinstance(learner.cost, GoalCost):
        return ("cost.w",), ("cost.goal",)
    return (("cost",),)


def active_groups(config: TrainConfig, learner: MpcController, epoch: int) -> Tuple[str, ...]:
    """
    Parameter groups updated during ``epoch`` (0-based). Cost methods
    alternate between the goal weights and the goal target.
    """
    if config.method in ("sysid", "lqr.dx", "mpc.dx"):
        return ("dx",)
    phases = _cost_groups(learner)
    cost = phases[(epoch // config.alternation_period) % len(phases)]
    return cost + ("dx",) if config.method == "mpc.cost.dx" else cost


def trained_groups(config: TrainConfig, learner: MpcController) -> Tuple[str, ...]:
    """Every group a method ever updates"""
    if config.method in ("sysid", "lqr.dx", "mpc.dx"):
        return ("dx",)
    cost = tuple(g for phase in _cost_groups(learner) for g in phase)
    return cost + ("dx",) if config.method == "mpc.cost.dx" else cost


class _Evaluator:
    """
    Per-epoch validation/test/model/sysid losses.

    Imitation losses average the converged samples only; the number of
    dropped samples is reported next to each of them.
    """

    def __init__(self, config: TrainConfig, dataset: ImitationDataset, expert: Optional[MpcController]):
        self.config = config
        self.dataset = dataset
        self.expert = expert
        self.test_transitions = transitions(dataset.test)

    def _imitation(self, learner: MpcController, records: Tuple[Record, ...]) -> Tuple[float, int]:
        if not records:
            return float("nan"), 0
        try:
            result = imitation_loss(learner, records, controls_only=self.config.compare_controls_only,
                                    workers=self.config.workers, with_grad=False)
        except NoConvergedSamples as e:
            logger.warning("evaluation failed: %s", e)
            return float("inf"), len(records)
        if result.n_dropped:
            logger.warning("evaluation dropped %d of %d samples", result.n_dropped, len(records))
        return result.loss, result.n_dropped

    def _model(self, learner: MpcController) -> float:
        if self.expert is None:
            return float("nan")
        groups = trained_groups(self.config, learner)
        try:
            return model_loss(self.expert.get_params(groups), learner.get_params(groups))
        except ParameterError:
            return float("nan")

    def __call__(self, learner: MpcController, epoch: int, train_loss: float) -> Dict[str, float]:
        sysid, _ = sysid_loss(learner.dynamics, self.test_transitions)
        val, val_dropped = self._imitation(learner, self.dataset.val)
        test, test_dropped = self._imitation(learner, self.dataset.test)
        return {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val,
            "test_loss": test,
            "model_loss": self._model(learner),
            "sysid_loss": sysid,
            "val_dropped": val_dropped,
            "test_dropped": test_dropped,
        }


def _improves(row: Dict[str, float], best: Dict[str, float]) -> bool:
    # fewer unconverged validation samples wins before a lower loss
    if not np.isfinite(best["val_loss"]):
        return True
    return (row["val_dropped"], row["val_loss"]) < (best["val_dropped"], best["val_loss"])


def _check_finite(epoch: int, **values) -> None:
    bad = {k: v for k, v in values.items() if not np.all(np.isfinite(v))}
    if bad:
        diagnostics = {k: np.asarray(v).tolist() for k, v in values.items()}
        raise TrainingDiverged(f"non-finite {sorted(bad)} at epoch {epoch}", epoch, diagnostics)


def train(
    config: TrainConfig,
    dataset: ImitationDataset,
    learner: MpcController,
    expert: Optional[MpcController] = None,
    on_epoch: Optional[Callable[[Dict[str, float]], None]] = None,
) -> TrainResult:
    """
    Train a learner controller on expert demonstrations.

    Args:
        config: Method, optimizer and schedule
        dataset: Demonstrations (train batches, val selection, test report)
        learner: Initial learner controller
        expert: Expert controller, used for the model loss when its
                parameters are comparable
        on_epoch: Called with every curve row as soon as it is computed

    Returns:
        TrainResult with the learner at the best validation loss

    Raises:
        ConfigError: batch_size exceeds the training set
        TrainingDiverged: A loss, gradient or parameter became non-finite

    Example:
        >>> result = train(TrainConfig(method="mpc.dx", epochs=20), dataset, learner, expert)
        >>> result.best_epoch, result.best_val
    """
    n_train = len(dataset.train)
    if config.batch_size > n_train:
        raise ConfigError(f"batch_size {config.batch_size} exceeds train size {n_train}")

    rng = np.random.default_rng(config.seed)
    evaluate = _Evaluator(config, dataset, expert)
    optimizers: Dict[Tuple[str, ...], Optimizer] = {}
    controls_only = config.compare_controls_only

    initial = evaluate(learner, 0, float("nan"))
    logger.info("epoch 0: val %.6g test %.6g", initial["val_loss"], initial["test_loss"])
    best_row, best_epoch, best_learner = initial, 0, learner
    curves: List[Dict[str, float]] = []
    dropped = 0

    for epoch in range(config.epochs):
        groups = active_groups(config, learner, epoch)
        order = rng.permutation(n_train)
        batch_losses, batch_sizes = [], []

        for start in range(0, n_train, config.batch_size):
            batch = tuple(dataset.train[i] for i in order[start:start + config.batch_size])
            if config.method == "sysid":
                loss, grad = sysid_loss(learner.dynamics, transitions(batch))
                used = len(batch)
            else:
                try:
                    result = imitation_loss(learner, batch, groups, controls_only, config.workers)
                except NoConvergedSamples as e:
                    logger.warning("epoch %d: skipping batch (%s)", epoch + 1, e)
                    dropped += len(batch)
                    continue
                loss, grad, used = result.loss, result.grad, result.n_used
                dropped += result.n_dropped

            _check_finite(epoch + 1, loss=loss, grad=grad)
            opt = optimizers.get(groups)
            if opt is None:
                opt = Optimizer(config.optimizer, config.learning_rate, config.decay, grad.shape[0])
                optimizers[groups] = opt
            params = opt.step(learner.get_params(groups), grad)
            _check_finite(epoch + 1, params=params)
            try:
                learner = learner.with_params(groups, params)
            except ParameterError as e:
                raise TrainingDiverged(f"invalid parameters at epoch {epoch + 1}: {e}", epoch + 1,
                                       {"params": params.tolist()}) from e
            batch_losses.append(loss)
            batch_sizes.append(used)

        train_loss = float(np.average(batch_losses, weights=batch_sizes)) if batch_losses else float("nan")
        row = evaluate(learner, epoch + 1, train_loss)
        curves.append(row)
        if on_epoch is not None:
            on_epoch(row)
        logger.info("epoch %d (%s): train %.6g val %.6g test %.6g", epoch + 1, "+".join(groups),
                    train_loss, row["val_loss"], row["test_loss"])

        if _improves(row, best_row):
            best_row, best_epoch, best_learner = row, epoch + 1, learner

    return TrainResult(
        curves=curves,
        best_params=best_learner.get_params(trained_groups(config, best_learner)),
        best_epoch=best_epoch,
        best_val=best_row["val_loss"],
        initial_losses=initial,
        dropped=dropped,
        learner=best_learner,
    )
