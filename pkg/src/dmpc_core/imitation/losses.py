"""
Imitation, model and system-identification losses
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..controller import MpcController
from ..envs.base import Dynamics
from ..exceptions import NoConvergedSamples, NotPositiveDefinite, ParameterError
from .dataset import Record

logger = logging.getLogger(__name__)


class LossResult(NamedTuple):
    """Batch loss with its gradient over the requested parameter groups"""
    loss: float
    grad: Optional[np.ndarray]
    n_used: int
    n_dropped: int


class _Element(NamedTuple):
    sq_error: float
    grad: Optional[np.ndarray]  # unnormalized: backward of 2 * residual


def _imitate_one(learner: MpcController, record: Record, groups: Sequence[str], controls_only: bool,
                 with_grad: bool) -> Optional[_Element]:
    problem, fp = learner.solve(record.x_init)
    if not fp.converged:
        return None
    residual = fp.traj.tau - record.traj.tau
    if controls_only:
        residual[:, :learner.dims.n_state] = 0.0
    sq_error = float(np.sum(residual ** 2))
    if not with_grad:
        return _Element(sq_error, None)
    try:
        grads = learner.backward(problem, fp, 2.0 * residual)
    except NotPositiveDefinite as e:
        logger.warning("backward pass failed, dropping sample: %s", e)
        return None
    return _Element(sq_error, learner.group_gradient(grads.dtheta, groups))


def imitation_loss(
    learner: MpcController,
    records: Sequence[Record],
    groups: Sequence[str] = ("dx",),
    controls_only: bool = False,
    workers: int = 1,
    with_grad: bool = True,
) -> LossResult:
    """
    Mean squared distance between learner and expert trajectories,
    E ||tau(x; theta_hat) - tau_expert||^2, or over controls only.

    Learner solves that do not converge are dropped and counted. The
    gradient is reduced in record order so results do not depend on
    ``workers``.

    Args:
        learner: Controller being trained
        records: Demonstrations
        groups: Parameter groups to differentiate
        controls_only: Compare controls only (state blocks of grad_tau are zero)
        workers: Thread count for the per-record solves
        with_grad: Skip the backward pass when False (evaluation)

    Returns:
        LossResult

    Raises:
        NoConvergedSamples: No record produced a converged learner solve

    Example:
        >>> result = imitation_loss(learner, dataset.train[:32], groups=["dx"], controls_only=True)
        >>> result.loss, result.grad
    """

    def run(record: Record) -> Optional[_Element]:
        return _imitate_one(learner, record, groups, controls_only, with_grad)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            elements = list(pool.map(run, records))
    else:
        elements = [run(record) for record in records]

    used = [e for e in elements if e is not None]
    n_dropped = len(elements) - len(used)
    if not used:
        raise NoConvergedSamples(f"all {len(elements)} learner solves failed to converge")
    if n_dropped:
        logger.debug("dropped %d of %d samples", n_dropped, len(elements))

    n = len(used)
    loss = sum(e.sq_error for e in used) / n
    grad = None
    if with_grad:
        grad = np.zeros_like(used[0].grad)
        for element in used:
            grad += element.grad
        grad /= n
    return LossResult(loss, grad, n, n_dropped)


def model_loss(theta: np.ndarray, theta_hat: np.ndarray) -> float:
    """
    MSE between two flat parameter vectors.

    Raises:
        ParameterError: Shapes differ

    Example:
        >>> model_loss(np.array([1.0]), np.array([3.0]))
        4.0
    """
    theta = np.asarray(theta, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if theta.shape != theta_hat.shape:
        raise ParameterError(f"parameter shapes differ: {theta.shape} vs {theta_hat.shape}")
    if theta.size == 0:
        return 0.0
    return float(np.mean((theta - theta_hat) ** 2))


def sysid_loss(dynamics: Dynamics, batch: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> Tuple[float, np.ndarray]:
    """
    Next-state prediction loss mean_i ||f(x_i, u_i; theta) - x'_i||^2 and
    its gradient over the dynamics parameters.
    """
    X, U, X_next = batch
    count = X.shape[0]
    grad = np.zeros(dynamics.params.shape[0])
    if count == 0:
        return 0.0, grad
    loss = 0.0
    for x, u, x_next in zip(X, U, X_next):
        residual = dynamics(x, u) - x_next
        loss += float(residual @ residual)
        grad += 2.0 * dynamics.param_jacobian(x, u).T @ residual
    return loss / count, grad / count
