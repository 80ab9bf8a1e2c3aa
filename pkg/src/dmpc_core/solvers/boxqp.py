"""
Projected-Newton solver for box-constrained convex QPs

    min 1/2 x' Q x + p' x   s.t.  lower <= x <= upper

and its implicit differentiation on the active set. This is the inner step
of the box-DDP backward recursion.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..exceptions import BoxQpError, ConfigError, DimensionError
from ..linalg import PdFactor, factorize_pd
from ..types import frozen_array

logger = logging.getLogger(__name__)

# Solver constants
MAX_ITERS = 100
MIN_GRAD = 1e-8
MIN_STEP = 1e-10
STEP_DECREASE = 0.5
ARMIJO = 0.1
MIN_LINESEARCH_STEP = 1e-22


@dataclass(frozen=True)
class BoxQp:
    """Box-constrained QP data; bounds may be infinite"""

    Q: np.ndarray
    p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        p = frozen_array(self.p, name="p")
        k = p.shape[0]
        Q = np.array(self.Q, dtype=np.float64)
        if Q.shape != (k, k):
            raise DimensionError(f"Q has shape {Q.shape}, expected {(k, k)}")
        lower = frozen_array(np.broadcast_to(self.lower, (k,)), name="lower")
        upper = frozen_array(np.broadcast_to(self.upper, (k,)), name="upper")
        if np.any(lower > upper):
            raise ConfigError("box QP needs lower <= upper componentwise")
        object.__setattr__(self, "Q", frozen_array(0.5 * (Q + Q.T), name="Q"))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def size(self) -> int:
        return self.p.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.p @ x)


class BoxQpSolution(NamedTuple):
    """
    Solution of a box QP.

    clamped marks coordinates at a bound whose gradient points outward;
    free_factor is the Cholesky factor of Q restricted to the free set;
    gradient is Q x + p at the solution.
    """
    x: np.ndarray
    clamped: np.ndarray
    free_factor: PdFactor
    gradient: np.ndarray
    iterations: int

    @property
    def free(self) -> np.ndarray:
        return ~self.clamped


def _clamped_set(x: np.ndarray, grad: np.ndarray, qp: BoxQp) -> np.ndarray:
    # a coordinate at a bound with exactly zero gradient stays free
    return ((x == qp.lower) & (grad > 0)) | ((x == qp.upper) & (grad < 0))


def boxqp_solve(qp: BoxQp, x_warm: Optional[np.ndarray] = None, max_iters: int = MAX_ITERS,
                grad_tol: float = MIN_GRAD, step_tol: float = MIN_STEP) -> BoxQpSolution:
    """
    Solve a box-constrained QP with projected Newton and Armijo line search.

    Args:
        qp: Problem data (Q positive definite)
        x_warm: Warm start, clipped into the box; defaults to zeros clipped
        max_iters: Iteration cap
        grad_tol: Stop once the free-set gradient infinity-norm is at most this
        step_tol: Stop once an iteration moves x by at most this

    Returns:
        BoxQpSolution

    Raises:
        BoxQpError: Iteration cap exceeded (carries last iterate and residual)
        NotPositiveDefinite: Q restricted to the free set is not PD

    Example:
        >>> sol = boxqp_solve(BoxQp(np.eye(1), np.array([-2.0]), -1.0, 1.0))
        >>> sol.x, sol.clamped
        (array([1.]), array([ True]))
    """
    k = qp.size
    x = np.zeros(k) if x_warm is None else np.array(x_warm, dtype=np.float64)
    if x.shape != (k,):
        raise DimensionError(f"warm start has shape {x.shape}, expected {(k,)}")
    x[~np.isfinite(x)] = 0.0
    x = np.clip(x, qp.lower, qp.upper)

    Q, p = qp.Q, qp.p
    value = qp.objective(x)
    clamped = np.zeros(k, dtype=bool)
    factor: Optional[PdFactor] = None
    residual = np.inf

    for iteration in range(1, max_iters + 1):
        grad = Q @ x + p
        old_clamped = clamped
        clamped = _clamped_set(x, grad, qp)
        free = ~clamped

        if factor is None or np.any(old_clamped != clamped):
            factor = factorize_pd(Q[np.ix_(free, free)])

        residual = float(np.max(np.abs(grad[free]))) if free.any() else 0.0
        if residual <= grad_tol:
            return _finish(qp, x, iteration)

        # Newton step on the free set, clamped coordinates held
        search = np.zeros(k)
        rhs = p[free] + Q[np.ix_(free, clamped)] @ x[clamped]
        search[free] = -factor.solve(rhs) - x[free]

        sdotg = float(search @ grad)
        if sdotg >= 0:
            logger.debug("box-QP: no descent direction at iteration %d", iteration)
            return _finish(qp, x, iteration)

        step = 1.0
        candidate = np.clip(x + step * search, qp.lower, qp.upper)
        cand_value = qp.objective(candidate)
        while (cand_value - value) / (step * sdotg) < ARMIJO:
            step *= STEP_DECREASE
            if step < MIN_LINESEARCH_STEP:
                break
            candidate = np.clip(x + step * search, qp.lower, qp.upper)
            cand_value = qp.objective(candidate)

        moved = float(np.max(np.abs(candidate - x)))
        x, value = candidate, cand_value
        if moved <= step_tol:
            return _finish(qp, x, iteration)

    raise BoxQpError(
        f"box-QP did not converge in {max_iters} iterations (free gradient {residual:.3e})",
        x=x,
        residual=residual,
    )


def _finish(qp: BoxQp, x: np.ndarray, iterations: int) -> BoxQpSolution:
    grad = qp.Q @ x + qp.p
    clamped = _clamped_set(x, grad, qp)
    free = ~clamped
    factor = factorize_pd(qp.Q[np.ix_(free, free)])
    for arr in (x, clamped, grad):
        arr.setflags(write=False)
    return BoxQpSolution(x, clamped, factor, grad, iterations)


def boxqp_backward(qp: BoxQp, sol: BoxQpSolution, grad_x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of a loss with respect to Q and p through the QP solution.

    The backward direction is d_f = -Q_ff^{-1} (dloss/dx)_f on the free set and
    zero on clamped coordinates; then dQ = 1/2 (d x' + x d') and dp = d.

    Returns:
        (dQ, dp)
    """
    grad_x = np.asarray(grad_x, dtype=np.float64)
    if grad_x.shape != (qp.size,):
        raise DimensionError(f"grad_x has shape {grad_x.shape}, expected {(qp.size,)}")
    d = np.zeros(qp.size)
    free = sol.free
    if free.any():
        d[free] = -sol.free_factor.solve(grad_x[free])
    dQ = 0.5 * (np.outer(d, sol.x) + np.outer(sol.x, d))
    return dQ, d
