"""
Analytic gradients of an LQR solution with respect to its parameters

One extra LQR solve (same C and F, reusing the forward factorizations) gives
the backward direction d_tau; the duals of that problem give d_lam. The
gradients with respect to C, c, F, f and x_init are outer products of the
primal/dual solutions with those directions.
"""

from typing import NamedTuple, Optional

import numpy as np

from ..types import Duals, LqrProblem, Trajectory
from .lqr import RiccatiCache, lqr_duals, lqr_solve


class LqrGradients(NamedTuple):
    """Loss gradients shaped like the fields of LqrProblem"""
    dC: np.ndarray
    dc: np.ndarray
    dF: np.ndarray
    df: np.ndarray
    dx_init: np.ndarray


def assemble_gradients(traj: Trajectory, duals: Duals, d_traj: Trajectory, d_duals: Duals) -> LqrGradients:
    """
    Parameter gradients from the primal/dual solution and the backward directions.

    dC_t = 1/2 (d_tau_t tau_t' + tau_t d_tau_t'),  dc_t = d_tau_t,
    dF_t = d_lam_{t+1} tau_t' + lam_{t+1} d_tau_t',  df_t = d_lam_{t+1},
    dx_init = d_lam_1. The last step has no dynamics constraint, so
    dF_T = df_T = 0.
    """
    tau, d_tau = traj.tau, d_traj.tau
    lam, d_lam = duals.lam, d_duals.lam
    T, n = lam.shape

    outer = np.einsum("ti,tj->tij", d_tau, tau)
    dC = 0.5 * (outer + np.swapaxes(outer, 1, 2))
    dc = d_tau.copy()

    dF = np.zeros((T, n, tau.shape[1]))
    df = np.zeros((T, n))
    dF[:-1] = np.einsum("ti,tj->tij", d_lam[1:], tau[:-1]) + np.einsum("ti,tj->tij", lam[1:], d_tau[:-1])
    df[:-1] = d_lam[1:]

    return LqrGradients(dC, dc, dF, df, d_lam[0].copy())


def lqr_backward(
    problem: LqrProblem,
    traj: Trajectory,
    duals: Duals,
    grad_tau: np.ndarray,
    cache: Optional[RiccatiCache] = None,
) -> LqrGradients:
    """
    Differentiate a loss through the LQR solution.

    Args:
        problem: The problem that was solved
        traj: Its optimal trajectory
        duals: Its duals (from lqr_duals)
        grad_tau: dloss/dtau, shape (T, n_tau)
        cache: Riccati cache from the forward solve; reused when given

    Returns:
        LqrGradients

    Raises:
        DimensionError: grad_tau has the wrong shape
        NotPositiveDefinite: Propagated from the backward solve

    Example:
        >>> traj, cache = lqr_solve(problem)
        >>> grads = lqr_backward(problem, traj, lqr_duals(problem, traj), 2 * traj.tau, cache)
    """
    diff_problem = problem.differential(grad_tau)
    d_traj, _ = lqr_solve(diff_problem, cache=cache)
    d_duals = lqr_duals(diff_problem, d_traj)
    return assemble_gradients(traj, duals, d_traj, d_duals)
