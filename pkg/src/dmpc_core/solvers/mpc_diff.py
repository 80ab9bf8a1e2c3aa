"""
Analytic backward pass through a box-DDP fixed point

At a fixed point the solver output is the solution of the convex
approximation built at it, so the LQR backward pass applies once the
clamped controls are removed: they sit on a bound that does not move with
the parameters, so their derivative is zero.
"""

import logging
from typing import NamedTuple

import numpy as np

from ..envs.base import Cost, Dynamics
from ..exceptions import ConfigError, DimensionError, NotAFixedPoint, NotPositiveDefinite
from ..types import LqrProblem
from .lqr import lqr_duals, lqr_solve
from .lqr_diff import LqrGradients, assemble_gradients
from .mpc import FixedPoint, MpcProblem

logger = logging.getLogger(__name__)

CURVATURE_MODES = ("exact", "gauss_newton")


class MpcGradients(NamedTuple):
    """
    Gradients of a loss through an MPC solution.

    dC..dx_init are shaped like the LqrProblem fields at the fixed point,
    d_tau is the backward direction and dtheta the flat gradient over
    [cost params, dynamics params].
    """
    dC: np.ndarray
    dc: np.ndarray
    dF: np.ndarray
    df: np.ndarray
    dx_init: np.ndarray
    d_tau: np.ndarray
    dtheta: np.ndarray
    curvature: str

    @property
    def lqr(self) -> LqrGradients:
        return LqrGradients(self.dC, self.dc, self.dF, self.df, self.dx_init)


def _mask_clamped(problem: LqrProblem, clamped: np.ndarray, grad_tau: np.ndarray) -> LqrProblem:
    """Differential problem with clamped controls pinned to zero"""
    n = problem.dims.n_state
    C = np.array(problem.C)
    F = np.array(problem.F)
    grad = np.array(grad_tau, dtype=np.float64)
    for t, j in zip(*np.nonzero(clamped)):
        col = n + j
        C[t, col, :] = 0.0
        C[t, :, col] = 0.0
        C[t, col, col] = 1.0
        F[t, :, col] = 0.0
        grad[t, col] = 0.0
    return problem.replace(C=C, F=F).differential(grad)


def _with_curvature(problem: LqrProblem, mpc_problem: MpcProblem, fp: FixedPoint, lam: np.ndarray) -> LqrProblem:
    """Add sum_i lam_{t+1,i} d^2 f_i / d tau^2 to C_t for every step with dynamics"""
    C = np.array(problem.C)
    x, u = fp.traj
    for t in range(problem.dims.horizon - 1):
        C[t] += mpc_problem.dynamics.curvature(x[t], u[t], lam[t + 1])
    return problem.replace(C=C)


def mpc_backward(
    problem: MpcProblem,
    fp: FixedPoint,
    grad_tau: np.ndarray,
    curvature: str = "exact",
    allow_unconverged: bool = False,
) -> MpcGradients:
    """
    Differentiate a loss through the box-DDP fixed point.

    Args:
        problem: The MPC problem that produced ``fp``
        fp: Result of mpc_solve
        grad_tau: dloss/dtau*, shape (T, n_tau)
        curvature: "exact" adds the dual-weighted dynamics curvature to the
                   Hessian of the backward problem; "gauss_newton" uses the
                   cost Hessian only. Both agree for affine dynamics.
        allow_unconverged: Differentiate the last iterate of a non-converged
                   solve instead of raising (timing runs)

    Returns:
        MpcGradients; d_tau is exactly zero on clamped controls

    Raises:
        NotAFixedPoint: fp.converged is False and allow_unconverged is not set
        DimensionError: grad_tau has the wrong shape
        NotPositiveDefinite: The Gauss-Newton backward problem is not PD

    Example:
        >>> fp = mpc_solve(problem)
        >>> grads = mpc_backward(problem, fp, 2.0 * (fp.traj.tau - tau_expert))
        >>> grads.dtheta
    """
    if curvature not in CURVATURE_MODES:
        raise ConfigError(f"curvature must be one of {CURVATURE_MODES}, got {curvature!r}")
    if not fp.converged:
        if not allow_unconverged:
            raise NotAFixedPoint(
                f"box-DDP stopped after {fp.iters_used} iterations without converging; "
                "the backward pass needs a fixed point"
            )
        logger.debug("differentiating a non-converged iterate")

    grad_tau = np.asarray(grad_tau, dtype=np.float64)
    T, nt = problem.dims.horizon, problem.dims.n_tau
    if grad_tau.shape != (T, nt):
        raise DimensionError(f"grad_tau has shape {grad_tau.shape}, expected {(T, nt)}")

    lqr_problem = fp.lqr_problem()
    duals = lqr_duals(lqr_problem, fp.traj)

    used = curvature
    base = _with_curvature(lqr_problem, problem, fp, duals.lam) if curvature == "exact" else lqr_problem
    diff_problem = _mask_clamped(base, fp.clamped, grad_tau)
    try:
        d_traj, _ = lqr_solve(diff_problem)
    except NotPositiveDefinite as e:
        if curvature != "exact":
            raise
        logger.warning("exact Hessian not positive definite (%s); using the Gauss-Newton Hessian", e)
        used = "gauss_newton"
        diff_problem = _mask_clamped(lqr_problem, fp.clamped, grad_tau)
        d_traj, _ = lqr_solve(diff_problem)
    d_duals = lqr_duals(diff_problem, d_traj)

    grads = assemble_gradients(fp.traj, duals, d_traj, d_duals)
    dtheta = chain_to_params(grads, fp, problem.cost, problem.dynamics)
    return MpcGradients(*grads, d_tau=d_traj.tau, dtheta=dtheta, curvature=used)


def chain_to_params(grads: LqrGradients, fp: FixedPoint, cost: Cost, dynamics: Dynamics) -> np.ndarray:
    """
    Contract LQR-level gradients with the parameter derivatives of the
    approximation at the fixed trajectory tau*.

    Returns:
        Flat gradient [d cost.params, d dynamics.params]
    """
    tau = fp.traj.tau
    d_cost = cost.param_adjoint(tau, grads.dC, grads.dc)
    d_dyn = dynamics.param_adjoint(tau, grads.dF, grads.df)
    return np.concatenate([np.asarray(d_cost, dtype=np.float64).ravel(),
                           np.asarray(d_dyn, dtype=np.float64).ravel()])
