"""
MPC controller policy

Bundles a dynamics model, a cost, the horizon and the control bounds into
one object that can solve from an initial state, differentiate a loss
through the solution, and expose its parameters in named groups for the
training loops.

Groups:
    "dx"         dynamics parameters
    "cost"       all cost parameters
    "cost.w"     goal-cost weights (GoalCost only)
    "cost.goal"  goal-cost target (GoalCost only)
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .envs.base import Cost, Dynamics
from .envs.cost import GoalCost
from .exceptions import ParameterError
from .solvers.mpc import FixedPoint, MpcProblem, SolverSettings, mpc_solve
from .solvers.mpc_diff import MpcGradients, mpc_backward
from .types import Dims

logger = logging.getLogger(__name__)


class MpcController:
    """
    Differentiable box-constrained MPC policy.

    Args:
        dynamics: Dynamics model
        cost: Per-timestep cost
        horizon: Planning horizon T
        u_lower: Lower control bound (scalar or per-dimension)
        u_upper: Upper control bound (scalar or per-dimension)
        settings: Box-DDP solver settings
        curvature: Hessian used by the backward pass ("exact" or "gauss_newton")

    Example:
        >>> ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 20, -2.0, 2.0)
        >>> problem, fp = ctrl.solve(np.array([-1.0, 0.0, 0.5]))
        >>> grads = ctrl.backward(problem, fp, np.ones_like(fp.traj.tau))
        >>> ctrl.group_gradient(grads.dtheta, ["dx"])
    """

    def __init__(
        self,
        dynamics: Dynamics,
        cost: Cost,
        horizon: int,
        u_lower=-np.inf,
        u_upper=np.inf,
        settings: Optional[SolverSettings] = None,
        curvature: str = "exact",
    ):
        self.dynamics = dynamics
        self.cost = cost
        self.dims = Dims(dynamics.n_state, dynamics.n_ctrl, horizon).validate()
        self.u_lower = np.broadcast_to(np.asarray(u_lower, dtype=np.float64), (dynamics.n_ctrl,)).copy()
        self.u_upper = np.broadcast_to(np.asarray(u_upper, dtype=np.float64), (dynamics.n_ctrl,)).copy()
        self.settings = settings or SolverSettings()
        self.curvature = curvature

    # ==================== Solving ====================

    def problem(self, x_init: np.ndarray, u_init: Optional[np.ndarray] = None) -> MpcProblem:
        """MpcProblem for an initial state; u_init defaults to zeros"""
        return MpcProblem(self.dims, self.cost, self.dynamics, self.u_lower, self.u_upper,
                          x_init, u_init, self.settings)

    def solve(self, x_init: np.ndarray, u_init: Optional[np.ndarray] = None) -> Tuple[MpcProblem, FixedPoint]:
        """Solve from x_init; returns the problem and its fixed point"""
        problem = self.problem(x_init, u_init)
        return problem, mpc_solve(problem)

    def backward(self, problem: MpcProblem, fp: FixedPoint, grad_tau: np.ndarray,
                 allow_unconverged: bool = False) -> MpcGradients:
        """Differentiate a loss through ``fp`` (see mpc_backward)"""
        return mpc_backward(problem, fp, grad_tau, self.curvature, allow_unconverged)

    # ==================== Parameters ====================

    def group_slices(self) -> Dict[str, slice]:
        """Slices of each parameter group in the flat [cost, dynamics] vector"""
        n_cost = self.cost.params.shape[0]
        n_dyn = self.dynamics.params.shape[0]
        slices = {
            "cost": slice(0, n_cost),
            "dx": slice(n_cost, n_cost + n_dyn),
        }
        if isinstance(self.cost, GoalCost):
            slices["cost.w"] = slice(0, self.cost.size)
            slices["cost.goal"] = slice(self.cost.size, n_cost)
        return slices

    def param_groups(self) -> Tuple[str, ...]:
        return tuple(sorted(self.group_slices()))

    @property
    def params(self) -> np.ndarray:
        """Flat [cost params, dynamics params]"""
        return np.concatenate([self.cost.params, self.dynamics.params])

    def _indices(self, groups: Sequence[str]) -> np.ndarray:
        slices = self.group_slices()
        unknown = [g for g in groups if g not in slices]
        if unknown:
            raise ParameterError(f"unknown parameter groups {unknown}; available: {sorted(slices)}")
        picked = [np.arange(slices[g].start, slices[g].stop) for g in groups]
        return np.unique(np.concatenate(picked)) if picked else np.zeros(0, dtype=int)

    def get_params(self, groups: Sequence[str]) -> np.ndarray:
        """Concatenated parameters of the named groups"""
        return self.params[self._indices(groups)]

    def group_gradient(self, dtheta: np.ndarray, groups: Sequence[str]) -> np.ndarray:
        """Restrict a full [cost, dynamics] gradient to the named groups"""
        return np.asarray(dtheta)[self._indices(groups)]

    def with_params(self, groups: Sequence[str], flat: np.ndarray) -> "MpcController":
        """
        Copy of this controller with the named groups replaced.

        Raises:
            ParameterError: ``flat`` does not match the group sizes
        """
        idx = self._indices(groups)
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.shape[0] != idx.shape[0]:
            raise ParameterError(f"groups {list(groups)} hold {idx.shape[0]} parameters, got {flat.shape[0]}")
        full = self.params.copy()
        full[idx] = flat
        n_cost = self.cost.params.shape[0]
        return MpcController(
            self.dynamics.with_params(full[n_cost:]),
            self.cost.with_params(full[:n_cost]),
            self.dims.horizon,
            self.u_lower,
            self.u_upper,
            self.settings,
            self.curvature,
        )

    def __repr__(self) -> str:
        return f"MpcController({self.dynamics!r}, {self.cost!r}, {self.dims!r})"
