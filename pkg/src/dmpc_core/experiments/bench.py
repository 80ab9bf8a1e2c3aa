"""
Forward/backward timing of the box-DDP solver

The forward solve runs exactly ``cap`` iterations; the backward pass is one
LQR solve at whatever iterate the forward pass stopped on, so its cost does
not depend on the cap.
"""

import logging
import time
from typing import Sequence

import numpy as np
import pandas as pd

from ..envs.cost import QuadraticCost
from ..envs.linear import LinearDynamics
from ..solvers.mpc import MpcProblem, SolverSettings, mpc_solve
from ..solvers.mpc_diff import mpc_backward
from ..types import Dims

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ("n_state", "n_ctrl", "cap", "trials", "forward_mean", "forward_std",
                 "backward_mean", "backward_std")


def random_box_problem(n_state: int, horizon: int, cap: int, rng: np.random.Generator) -> MpcProblem:
    """
    Random linear-quadratic problem with unit control bounds that bind.

    n_ctrl is half the state size (at least one).
    """
    n_ctrl = max(1, n_state // 2)
    nt = n_state + n_ctrl
    A = np.eye(n_state) + 0.1 * rng.standard_normal((n_state, n_state))
    B = rng.standard_normal((n_state, n_ctrl))
    L = rng.standard_normal((nt, nt))
    C = L @ L.T / nt + 0.1 * np.eye(nt)
    c = rng.standard_normal(nt)
    settings = SolverSettings(max_iters=cap, early_stop=False)
    return MpcProblem(
        Dims(n_state, n_ctrl, horizon),
        QuadraticCost(C, c),
        LinearDynamics(A, B),
        -1.0,
        1.0,
        x_init=3.0 * rng.standard_normal(n_state),
        settings=settings,
    )


def _time_once(problem: MpcProblem, grad_tau: np.ndarray):
    start = time.perf_counter()
    fp = mpc_solve(problem)
    middle = time.perf_counter()
    mpc_backward(problem, fp, grad_tau, curvature="gauss_newton", allow_unconverged=True)
    end = time.perf_counter()
    return middle - start, end - middle


def bench_backward(
    n_states: Sequence[int] = (4, 8, 16),
    caps: Sequence[int] = (10, 50, 100),
    trials: int = 10,
    horizon: int = 20,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Time mpc_solve and mpc_backward over a sweep of state sizes and
    iteration caps.

    One warm-up run per configuration is discarded; the remaining
    ``trials`` runs use fresh random problems.

    Returns:
        DataFrame with one row per (n_state, cap) and the BENCH_COLUMNS

    Example:
        >>> table = bench_backward(n_states=[4], caps=[1, 100], trials=3)
        >>> table[["cap", "backward_mean"]]
    """
    rows = []
    for n_state in n_states:
        for cap in caps:
            rng = np.random.default_rng([seed, n_state, cap])
            warmup = random_box_problem(n_state, horizon, cap, rng)
            nt = warmup.dims.n_tau
            _time_once(warmup, rng.standard_normal((horizon, nt)))

            forward, backward = [], []
            for _ in range(trials):
                problem = random_box_problem(n_state, horizon, cap, rng)
                fwd, bwd = _time_once(problem, rng.standard_normal((horizon, nt)))
                forward.append(fwd)
                backward.append(bwd)
            rows.append({
                "n_state": n_state,
                "n_ctrl": warmup.dims.n_ctrl,
                "cap": cap,
                "trials": trials,
                "forward_mean": float(np.mean(forward)),
                "forward_std": float(np.std(forward)),
                "backward_mean": float(np.mean(backward)),
                "backward_std": float(np.std(backward)),
            })
            logger.info("n=%d cap=%d: forward %.4fs backward %.4fs", n_state, cap,
                        rows[-1]["forward_mean"], rows[-1]["backward_mean"])
    return pd.DataFrame(rows, columns=list(BENCH_COLUMNS))
