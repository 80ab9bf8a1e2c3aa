"""
Box-DDP (control-limited iLQR) solver for nonconvex MPC

    min_tau  sum_t C(tau_t, t)   s.t.  x_{t+1} = f(x_t, u_t),  x_1 = x_init,
                                       u_lower <= u_t <= u_upper

Each iteration builds the quadratic/affine approximation at the incumbent
trajectory, runs a backward recursion whose control step is a box QP, and
rolls the resulting policy through the true dynamics with a backtracking
line search on the true cost.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..envs.base import Cost, Dynamics
from ..exceptions import BoxQpError, ConfigError, DimensionError, NotPositiveDefinite
from ..types import Dims, LqrProblem, Trajectory, frozen_array
from .boxqp import BoxQp, boxqp_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    """Iteration, line-search and regularization knobs of the box-DDP solver"""

    max_iters: int = 50
    convergence_tol: float = 1e-7  # max |u^{i+1} - u^i| declaring a fixed point
    alpha_init: float = 1.0
    decay: float = 0.5  # line-search step factor
    max_backtracks: int = 10
    reg_init: float = 1e-6  # mu added to Q_uu
    reg_max: float = 1e6
    stagnation_tol: float = 1e-10  # cost improvement counted as no progress
    stagnation_patience: int = 10
    stationarity_tol: float = 1e-6  # projected control gradient required at a fixed point
    qp_grad_tol: float = 1e-8  # box-QP free-gradient stopping threshold
    qp_step_tol: float = 1e-10  # box-QP step-size stopping threshold
    early_stop: bool = True  # False runs exactly max_iters iterations

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.max_backtracks < 0 or self.stagnation_patience < 1:
            raise ConfigError("max_iters and stagnation_patience must be >= 1, max_backtracks >= 0")
        if not 0.0 < self.decay < 1.0:
            raise ConfigError("line-search decay must lie in (0, 1)")
        if self.alpha_init <= 0 or self.reg_init <= 0 or self.reg_max < self.reg_init:
            raise ConfigError("alpha_init and reg_init must be positive and reg_max >= reg_init")
        tolerances = (self.convergence_tol, self.stagnation_tol, self.stationarity_tol,
                      self.qp_grad_tol, self.qp_step_tol)
        if min(tolerances) < 0:
            raise ConfigError("tolerances must be non-negative")


@dataclass(frozen=True)
class MpcProblem:
    """
    Nonconvex control problem with box control bounds.

    Bounds broadcast over time and may be infinite; u_init defaults to zeros
    and is clipped into the bounds.
    """

    dims: Dims
    cost: Cost
    dynamics: Dynamics
    u_lower: np.ndarray
    u_upper: np.ndarray
    x_init: np.ndarray
    u_init: Optional[np.ndarray] = None
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        dims = Dims(*self.dims).validate()
        n, m, T = dims
        if (self.dynamics.n_state, self.dynamics.n_ctrl) != (n, m):
            raise DimensionError(
                f"dynamics has n={self.dynamics.n_state}, m={self.dynamics.n_ctrl}; problem has {dims!r}"
            )
        lower = frozen_array(np.broadcast_to(np.asarray(self.u_lower, dtype=np.float64), (m,)), name="u_lower")
        upper = frozen_array(np.broadcast_to(np.asarray(self.u_upper, dtype=np.float64), (m,)), name="u_upper")
        if np.any(lower > upper):
            raise ConfigError("control bounds need u_lower <= u_upper")
        u_init = np.zeros((T, m)) if self.u_init is None else np.array(self.u_init, dtype=np.float64)
        if u_init.shape != (T, m):
            raise DimensionError(f"u_init has shape {u_init.shape}, expected {(T, m)}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "u_lower", lower)
        object.__setattr__(self, "u_upper", upper)
        object.__setattr__(self, "x_init", frozen_array(self.x_init, (n,), "x_init"))
        object.__setattr__(self, "u_init", frozen_array(np.clip(u_init, lower, upper), name="u_init"))

    def __repr__(self) -> str:
        return f"MpcProblem({self.dims!r}, {self.dynamics!r}, {self.cost!r})"


class Linearization(NamedTuple):
    """Quadratic cost / affine dynamics approximation in absolute LQR form"""
    C: np.ndarray
    c: np.ndarray
    F: np.ndarray
    f: np.ndarray

    def as_lqr_problem(self, x_init: np.ndarray) -> LqrProblem:
        T, n, nt = self.F.shape
        return LqrProblem(Dims(n, nt - n, T), self.C, self.c, self.F, self.f, x_init)


class StepResult(NamedTuple):
    """Outcome of one box-DDP iteration"""
    traj: Trajectory
    accepted: bool
    cost: float
    alpha: float
    K: np.ndarray
    k: np.ndarray
    clamped: np.ndarray
    control_gradient: np.ndarray
    stationarity: float  # max projected control gradient at the incumbent


@dataclass(frozen=True)
class FixedPoint:
    """
    Result of mpc_solve: the final trajectory with the approximation built at
    it, the clamped-control mask and convergence bookkeeping.
    """

    traj: Trajectory
    linearization: Linearization
    clamped: np.ndarray  # (T, m) controls at a bound with an outward gradient
    converged: bool
    iters_used: int
    total_cost: float
    cost_history: Tuple[float, ...]
    control_gradient: np.ndarray  # (T, m) box-QP gradient at the final backward pass
    u_lower: np.ndarray
    u_upper: np.ndarray

    def lqr_problem(self) -> LqrProblem:
        """The convex approximation at the fixed point as an LqrProblem"""
        return self.linearization.as_lqr_problem(self.traj.x[0])

    def weakly_active(self, tol: float = 1e-6) -> bool:
        """
        True when some bound is degenerate: clamped with a near-zero
        multiplier, or a free control within ``tol`` of a bound.
        """
        u = self.traj.u
        near_bound = np.minimum(u - self.u_lower, self.u_upper - u) < tol
        degenerate = self.clamped & (np.abs(self.control_gradient) < tol)
        return bool(np.any(degenerate) or np.any(~self.clamped & near_bound))


# ==================== Building blocks ====================

def rollout(problem: MpcProblem, u: np.ndarray) -> Trajectory:
    """Trajectory produced by applying controls u from the problem's x_init"""
    return Trajectory.create(problem.dynamics.rollout(problem.x_init, u), u)


def trajectory_cost(problem: MpcProblem, traj: Trajectory) -> float:
    """Total true cost sum_t C(tau_t, t)"""
    tau = traj.tau
    return float(sum(problem.cost(tau[t], t) for t in range(tau.shape[0])))


def linearize(problem: MpcProblem, traj: Trajectory) -> Linearization:
    """
    Second-order cost / first-order dynamics expansion at ``traj``:

        C_t = Hessian,  c_t = gradient - C_t tau_t,
        F_t = Jacobian, f_t = f(tau_t) - F_t tau_t
    """
    n, m, T = problem.dims
    nt = n + m
    tau = traj.tau
    C = np.zeros((T, nt, nt))
    c = np.zeros((T, nt))
    F = np.zeros((T, n, nt))
    f = np.zeros((T, n))
    for t in range(T):
        H, p = problem.cost.expansion(tau[t], t)
        C[t] = 0.5 * (H + H.T)
        c[t] = p - C[t] @ tau[t]
        F[t], f[t] = problem.dynamics.linearize(traj.x[t], traj.u[t])
    return Linearization(C, c, F, f)


def _backward_pass(problem: MpcProblem, traj: Trajectory, lin: Linearization, reg: float,
                   k_warm: Optional[np.ndarray] = None):
    """
    Box-constrained Riccati recursion in deviation coordinates.

    Returns (K, k, clamped, at_lower, at_upper, control_gradient, stationarity);
    stationarity is the largest projected gradient |clip(-q_u, box)| of the
    control subproblems at k = 0.

    Raises:
        NotPositiveDefinite: Q_uu + reg I is not PD on the free set
    """
    n, m, T = problem.dims
    tau = traj.tau
    K = np.zeros((T, m, n))
    k = np.zeros((T, m))
    clamped = np.zeros((T, m), dtype=bool)
    at_lower = np.zeros((T, m), dtype=bool)
    at_upper = np.zeros((T, m), dtype=bool)
    control_gradient = np.zeros((T, m))
    stationarity = 0.0
    settings = problem.settings
    V = np.zeros((n, n))
    v = np.zeros(n)

    for t in range(T - 1, -1, -1):
        grad = lin.C[t] @ tau[t] + lin.c[t]
        if t == T - 1:
            Q, q = lin.C[t], grad
        else:
            Ft = lin.F[t]
            Q = lin.C[t] + Ft.T @ V @ Ft
            q = grad + Ft.T @ v
        Q_xx, Q_xu, Q_ux, Q_uu = Q[:n, :n], Q[:n, n:], Q[n:, :n], Q[n:, n:]
        q_x, q_u = q[:n], q[n:]

        qp = BoxQp(Q_uu + reg * np.eye(m), q_u,
                   problem.u_lower - traj.u[t], problem.u_upper - traj.u[t])
        try:
            sol = boxqp_solve(qp, None if k_warm is None else k_warm[t],
                              grad_tol=settings.qp_grad_tol, step_tol=settings.qp_step_tol)
        except NotPositiveDefinite as e:
            raise NotPositiveDefinite(f"Q_uu not positive definite at timestep {t}: {e}", timestep=t) from e

        stationarity = max(stationarity, float(np.max(np.abs(np.clip(-q_u, qp.lower, qp.upper)), initial=0.0)))
        k[t] = sol.x
        free = sol.free
        clamped[t] = sol.clamped
        at_lower[t] = sol.clamped & (sol.x == qp.lower)
        at_upper[t] = sol.clamped & (sol.x == qp.upper)
        control_gradient[t] = sol.gradient
        if free.any():
            K[t][free] = -sol.free_factor.solve(Q_ux[free])

        Kt, kt = K[t], k[t]
        Vt = Q_xx + Kt.T @ Q_uu @ Kt + Kt.T @ Q_ux + Q_xu @ Kt
        V = 0.5 * (Vt + Vt.T)
        v = q_x + Kt.T @ Q_uu @ kt + Kt.T @ q_u + Q_xu @ kt

    return K, k, clamped, at_lower, at_upper, control_gradient, stationarity


def _forward_pass(problem: MpcProblem, traj: Trajectory, K: np.ndarray, k: np.ndarray, alpha: float,
                  at_lower: np.ndarray, at_upper: np.ndarray) -> Trajectory:
    """Roll the updated policy through the true dynamics, clipping controls"""
    n, m, T = problem.dims
    x = np.zeros((T, n))
    u = np.zeros((T, m))
    x[0] = problem.x_init
    for t in range(T):
        u_t = traj.u[t] + alpha * k[t] + K[t] @ (x[t] - traj.x[t])
        u_t = np.clip(u_t, problem.u_lower, problem.u_upper)
        if alpha == 1.0:
            # full steps land exactly on the bounds of clamped coordinates
            u_t[at_lower[t]] = problem.u_lower[at_lower[t]]
            u_t[at_upper[t]] = problem.u_upper[at_upper[t]]
        u[t] = u_t
        if t < T - 1:
            x[t + 1] = problem.dynamics(x[t], u_t)
    return Trajectory.create(x, u)


def mpc_step(problem: MpcProblem, traj: Trajectory, lin: Linearization, reg: Optional[float] = None,
             cost: Optional[float] = None) -> StepResult:
    """
    One box-DDP iteration from ``traj`` using the approximation ``lin`` built at it.

    Args:
        problem: The MPC problem
        traj: Incumbent trajectory
        lin: linearize(problem, traj)
        reg: mu added to Q_uu (defaults to settings.reg_init)
        cost: Incumbent true cost, recomputed when omitted

    Returns:
        StepResult; when no step size within the backtracking budget keeps
        the true cost from increasing, ``accepted`` is False and the
        incumbent is returned.

    Raises:
        NotPositiveDefinite: Regularized Q_uu not PD (caller raises reg)
        BoxQpError: A control subproblem hit its iteration cap
    """
    settings = problem.settings
    reg = settings.reg_init if reg is None else reg
    old_cost = trajectory_cost(problem, traj) if cost is None else cost
    K, k, clamped, at_lower, at_upper, qu, stationarity = _backward_pass(problem, traj, lin, reg)

    alpha = settings.alpha_init
    for _ in range(settings.max_backtracks + 1):
        candidate = _forward_pass(problem, traj, K, k, alpha, at_lower, at_upper)
        new_cost = trajectory_cost(problem, candidate)
        if new_cost <= old_cost:
            return StepResult(candidate, True, new_cost, alpha, K, k, clamped, qu, stationarity)
        alpha *= settings.decay

    logger.debug("line search exhausted (cost %.6g)", old_cost)
    return StepResult(traj, False, old_cost, 0.0, K, k, clamped, qu, stationarity)


# ==================== Solver loop ====================

def mpc_solve(problem: MpcProblem) -> FixedPoint:
    """
    Solve the MPC problem with box-DDP.

    Iterates mpc_step until the incumbent is a fixed point of its own convex
    approximation: the box-QP step k and the applied change max |u^{i+1} - u^i|
    are both below convergence_tol and the projected control gradient is at
    most stationarity_tol. A damped step that barely moves u does not count.
    Non-convergence is reported in ``FixedPoint.converged``, never raised.

    Example:
        >>> problem = MpcProblem(Dims(3, 1, 20), pendulum_goal_cost(), Pendulum(PendulumParams()),
        ...                      -2.0, 2.0, x_init=np.array([-1.0, 0.0, 0.0]))
        >>> fp = mpc_solve(problem)
        >>> fp.converged, fp.total_cost
    """
    settings = problem.settings
    tol = settings.convergence_tol
    traj = rollout(problem, problem.u_init)
    cost = trajectory_cost(problem, traj)
    history = [cost]
    lin = linearize(problem, traj)
    reg = settings.reg_init
    converged = False
    iters = 0
    stalled = 0
    last: Optional[StepResult] = None  # step evaluated at the current traj

    while iters < settings.max_iters:
        try:
            step = mpc_step(problem, traj, lin, reg, cost)
        except (NotPositiveDefinite, BoxQpError) as e:
            reg *= 10.0
            logger.debug("raising regularization to %.1e (%s)", reg, e)
            if reg > settings.reg_max:
                logger.warning("regularization limit reached; stopping at iteration %d", iters)
                break
            continue
        iters += 1
        last = step
        small_step = float(np.max(np.abs(step.k), initial=0.0)) < tol
        stationary = step.stationarity <= settings.stationarity_tol

        if not step.accepted:
            converged = small_step and (stationary or reg <= settings.reg_init)
            if converged:
                if settings.early_stop:
                    break
                continue
            if small_step:
                # regularization shrank the step, not stationarity
                reg = max(reg / 10.0, settings.reg_init)
                continue
            reg *= 10.0
            if reg > settings.reg_max:
                logger.warning("line search keeps failing; stopping at iteration %d", iters)
                break
            continue

        du = float(np.max(np.abs(step.traj.u - traj.u), initial=0.0))
        improvement = cost - step.cost
        traj, cost = step.traj, step.cost
        history.append(cost)
        lin = linearize(problem, traj)
        last = None
        reg = max(reg / 10.0, settings.reg_init)
        converged = du < tol and small_step and stationary
        logger.debug("iteration %d: cost %.10g, max du %.3e, |k| %s, stationarity %.3e, alpha %.3g",
                     iters, cost, du, "small" if small_step else "large", step.stationarity, step.alpha)
        if converged and settings.early_stop:
            break

        stalled = stalled + 1 if improvement < settings.stagnation_tol else 0
        if settings.early_stop and stalled >= settings.stagnation_patience:
            logger.debug("no cost progress for %d iterations; stopping", stalled)
            break

    if last is None:
        last = _final_backward(problem, traj, lin, reg)

    u = traj.u
    clamped = last.clamped & ((u == problem.u_lower) | (u == problem.u_upper))
    if not converged:
        logger.info("box-DDP stopped without reaching a fixed point after %d iterations", iters)
    return FixedPoint(
        traj=traj,
        linearization=lin,
        clamped=clamped,
        converged=converged,
        iters_used=iters,
        total_cost=cost,
        cost_history=tuple(history),
        control_gradient=last.control_gradient,
        u_lower=problem.u_lower,
        u_upper=problem.u_upper,
    )


def _final_backward(problem: MpcProblem, traj: Trajectory, lin: Linearization, reg: float) -> StepResult:
    """Backward pass only, to read the clamped set at the returned trajectory"""
    while True:
        try:
            K, k, clamped, _, _, qu, stationarity = _backward_pass(problem, traj, lin, reg)
            return StepResult(traj, False, trajectory_cost(problem, traj), 0.0, K, k, clamped, qu, stationarity)
        except (NotPositiveDefinite, BoxQpError):
            if reg > problem.settings.reg_max:
                raise
            reg *= 10.0
