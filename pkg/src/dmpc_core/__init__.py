"""
dmpc_core - Differentiable Model Predictive Control

Finite-horizon LQR and box-constrained iLQR solvers whose solutions are
differentiated analytically with one extra LQR solve, plus imitation
learning and system identification experiments built on them.

Version: 0.1.0
"""

__version__ = "0.1.0"

# Public API
__all__ = [
    # Controller
    "MpcController",

    # Solvers
    "lqr_solve",
    "lqr_duals",
    "lqr_backward",
    "kkt_residual",
    "boxqp_solve",
    "boxqp_backward",
    "linearize",
    "mpc_step",
    "mpc_solve",
    "mpc_backward",
    "chain_to_params",

    # Solver types
    "RiccatiCache",
    "LqrGradients",
    "BoxQp",
    "BoxQpSolution",
    "SolverSettings",
    "MpcProblem",
    "Linearization",
    "FixedPoint",
    "MpcGradients",

    # Environments
    "Dynamics",
    "Cost",
    "LinearDynamics",
    "Pendulum",
    "PendulumParams",
    "Cartpole",
    "CartpoleParams",
    "QuadraticCost",
    "GoalCost",
    "goal_cost_expansion",

    # Types
    "Dims",
    "LqrProblem",
    "Trajectory",
    "Duals",
    "assemble_tau",
    "split_tau",

    # Linear algebra
    "PdFactor",
    "factorize_pd",
    "solve_pd",

    # Exceptions
    "CoreError",
    "DimensionError",
    "NotPositiveDefinite",
    "BoxQpError",
    "NotAFixedPoint",
    "ParameterError",
    "NoConvergedSamples",
    "TrainingDiverged",
    "ConfigError",
]

# Types
from .types import Dims, Duals, LqrProblem, Trajectory, assemble_tau, split_tau

# Linear algebra
from .linalg import PdFactor, factorize_pd, solve_pd

# Solvers
from .solvers.lqr import RiccatiCache, kkt_residual, lqr_duals, lqr_solve
from .solvers.lqr_diff import LqrGradients, lqr_backward
from .solvers.boxqp import BoxQp, BoxQpSolution, boxqp_backward, boxqp_solve
from .solvers.mpc import FixedPoint, Linearization, MpcProblem, SolverSettings, linearize, mpc_solve, mpc_step
from .solvers.mpc_diff import MpcGradients, chain_to_params, mpc_backward

# Environments
from .envs import (
    Cartpole,
    CartpoleParams,
    Cost,
    Dynamics,
    GoalCost,
    LinearDynamics,
    Pendulum,
    PendulumParams,
    QuadraticCost,
    goal_cost_expansion,
)

# Controller
from .controller import MpcController

# Exceptions
from .exceptions import (
    CoreError,
    DimensionError,
    NotPositiveDefinite,
    BoxQpError,
    NotAFixedPoint,
    ParameterError,
    NoConvergedSamples,
    TrainingDiverged,
    ConfigError,
)
