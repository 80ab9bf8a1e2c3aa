"""
Finite-horizon LQR by Riccati recursion, and recovery of the dynamics duals
"""

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..exceptions import DimensionError
from ..linalg import PdFactor, factorize_pd
from ..types import Duals, LqrProblem, Trajectory

logger = logging.getLogger(__name__)


class RiccatiCache(NamedTuple):
    """
    Per-timestep quantities of the backward recursion.

    factors[t] is the Cholesky factor of Q_{t,uu}; K (T, m, n) and k (T, m)
    are the feedback and feedforward gains; V (T, n, n) and v (T, n) the
    value-function terms.
    """
    factors: Tuple[PdFactor, ...]
    K: np.ndarray
    k: np.ndarray
    V: np.ndarray
    v: np.ndarray


def lqr_solve(problem: LqrProblem, cache: Optional[RiccatiCache] = None) -> Tuple[Trajectory, RiccatiCache]:
    """
    Solve an LQR problem with the backward/forward Riccati recursion.

    Args:
        problem: The LQR problem
        cache: Factorizations from a previous solve of a problem with the same
               C and F. When given, only the affine terms (k, v) are
               recomputed.

    Returns:
        (trajectory, cache)

    Raises:
        NotPositiveDefinite: Q_{t,uu} is not positive definite (names t)

    Example:
        >>> traj, cache = lqr_solve(problem)
        >>> traj.u[0]
    """
    n, m, T = problem.dims
    C, c, F, f = problem.C, problem.c, problem.F, problem.f
    reuse = cache is not None
    if reuse and (cache.K.shape != (T, m, n) or len(cache.factors) != T):
        raise DimensionError("Riccati cache does not match the problem dimensions")

    factors = list(cache.factors) if reuse else [None] * T
    K = cache.K if reuse else np.zeros((T, m, n))
    V = cache.V if reuse else np.zeros((T, n, n))
    k = np.zeros((T, m))
    v = np.zeros((T, n))

    # ==================== Backward recursion ====================
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            Q, q = C[t], c[t]
        else:
            Ft = F[t]
            q = c[t] + Ft.T @ (V[t + 1] @ f[t] + v[t + 1])
            Q = None if reuse else C[t] + Ft.T @ V[t + 1] @ Ft

        q_x, q_u = q[:n], q[n:]
        if reuse:
            factor, Kt = factors[t], K[t]
            # Q_xu k + K' q_u + K' Q_uu k collapses to K' q_u because Q_uu k = -q_u
            k[t] = -factor.solve(q_u)
            v[t] = q_x + Kt.T @ q_u
            continue

        Q_xx, Q_xu = Q[:n, :n], Q[:n, n:]
        Q_ux, Q_uu = Q[n:, :n], Q[n:, n:]
        factor = factorize_pd(Q_uu, timestep=t)
        factors[t] = factor
        K[t] = -factor.solve(Q_ux)
        k[t] = -factor.solve(q_u)

        Kt = K[t]
        Vt = Q_xx + Q_xu @ Kt + Kt.T @ Q_ux + Kt.T @ Q_uu @ Kt
        V[t] = 0.5 * (Vt + Vt.T)
        v[t] = q_x + Q_xu @ k[t] + Kt.T @ q_u + Kt.T @ Q_uu @ k[t]

    # ==================== Forward recursion ====================
    x = np.zeros((T, n))
    u = np.zeros((T, m))
    x[0] = problem.x_init
    for t in range(T):
        u[t] = K[t] @ x[t] + k[t]
        if t < T - 1:
            x[t + 1] = F[t] @ np.concatenate([x[t], u[t]]) + f[t]

    logger.debug("LQR solved: %r (reused factorizations: %s)", problem.dims, reuse)
    for arr in (K, k, V, v):
        arr.setflags(write=False)
    return Trajectory.create(x, u), RiccatiCache(tuple(factors), K, k, V, v)


def lqr_duals(problem: LqrProblem, traj: Trajectory) -> Duals:
    """
    Recover the dynamics duals of an optimal trajectory.

        lam_T = C_{T,x} tau_T + c_{T,x}
        lam_t = F_{t,x}' lam_{t+1} + C_{t,x} tau_t + c_{t,x}

    where the x-subscript selects the state block-rows.
    """
    n, _, T = problem.dims
    if traj.x.shape != (T, n) or traj.tau.shape[1] != problem.dims.n_tau:
        raise DimensionError(f"trajectory {traj!r} does not match {problem.dims!r}")
    tau = traj.tau
    lam = np.zeros((T, n))
    for t in range(T - 1, -1, -1):
        lam[t] = problem.C[t, :n] @ tau[t] + problem.c[t, :n]
        if t < T - 1:
            lam[t] += problem.F[t, :, :n].T @ lam[t + 1]
    lam.setflags(write=False)
    return Duals(lam)


def kkt_residual(problem: LqrProblem, traj: Trajectory, duals: Duals) -> float:
    """
    Largest absolute residual of the LQR KKT system (stationarity and
    dynamics feasibility) at (traj, duals).
    """
    n, _, T = problem.dims
    tau, lam = traj.tau, duals.lam
    worst = float(np.max(np.abs(traj.x[0] - problem.x_init)))
    for t in range(T):
        grad = problem.C[t] @ tau[t] + problem.c[t]
        grad[:n] -= lam[t]
        if t < T - 1:
            grad += problem.F[t].T @ lam[t + 1]
            defect = problem.F[t] @ tau[t] + problem.f[t] - traj.x[t + 1]
            worst = max(worst, float(np.max(np.abs(defect))))
        worst = max(worst, float(np.max(np.abs(grad))))
    return worst
