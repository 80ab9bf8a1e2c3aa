"""LQR, box-QP and box-DDP solvers with their analytic backward passes"""

from .boxqp import BoxQp, BoxQpSolution, boxqp_backward, boxqp_solve
from .lqr import RiccatiCache, kkt_residual, lqr_duals, lqr_solve
from .lqr_diff import LqrGradients, assemble_gradients, lqr_backward
from .mpc import (
    FixedPoint,
    Linearization,
    MpcProblem,
    SolverSettings,
    StepResult,
    linearize,
    mpc_solve,
    mpc_step,
    rollout,
    trajectory_cost,
)
from .mpc_diff import MpcGradients, chain_to_params, mpc_backward
