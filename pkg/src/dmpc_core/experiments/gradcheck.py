"""
Finite-difference check of the analytic backward passes

For the MPC environments the loss is l(tau*) = <r, tau*> with a random r,
differentiated over every cost and dynamics parameter and compared with
central differences (relative steps) through warm-started re-solves. For "lqr" random
directional derivatives of C, c, F, f and x_init are compared.
"""

import logging
from typing import Any, Dict, List

import numpy as np

from ..controller import MpcController
from ..envs.cartpole import Cartpole, CartpoleParams, cartpole_goal_cost, sample_cartpole_state
from ..envs.pendulum import Pendulum, PendulumParams, pendulum_goal_cost, sample_pendulum_state
from ..exceptions import ConfigError, NoConvergedSamples
from ..solvers.lqr import lqr_duals, lqr_solve
from ..solvers.lqr_diff import lqr_backward
from ..solvers.mpc import SolverSettings
from ..types import Dims, LqrProblem
from ..utils import finite_difference, relative_error

logger = logging.getLogger(__name__)

# tight solves so finite differences resolve the fixed point
CHECK_SETTINGS = SolverSettings(max_iters=500, convergence_tol=1e-12, stationarity_tol=1e-10,
                                qp_grad_tol=1e-13, qp_step_tol=1e-15, stagnation_tol=0.0)
ERROR_FLOOR = 1e-6
MAX_ATTEMPTS = 20


def check_controller(controller: MpcController, sampler, rng: np.random.Generator, eps: float) -> Dict[str, Any]:
    """
    Compare the analytic parameter gradient of one random instance with
    central differences taken with steps eps * max(1, |theta_j|).

    An instance is resampled when it fails to converge, has a weakly active
    bound, or when some perturbed re-solve fails to converge or changes the
    clamped set.
    """
    n_cost = controller.cost.params.shape[0]
    for attempt in range(MAX_ATTEMPTS):
        x_init = sampler(rng)
        problem, fp = controller.solve(x_init)
        if not fp.converged or fp.weakly_active(1e-6):
            logger.debug("gradcheck: resampling instance %d", attempt)
            continue
        r = rng.standard_normal(fp.traj.tau.shape)
        analytic = controller.backward(problem, fp, r).dtheta
        u_star = fp.traj.u
        flips = []

        def loss(theta: np.ndarray) -> float:
            perturbed = MpcController(
                controller.dynamics.with_params(theta[n_cost:]),
                controller.cost.with_params(theta[:n_cost]),
                controller.dims.horizon, controller.u_lower, controller.u_upper,
                controller.settings, controller.curvature,
            )
            _, fp_eps = perturbed.solve(x_init, u_star)
            if not fp_eps.converged or not np.array_equal(fp_eps.clamped, fp.clamped):
                flips.append(theta)
            return float(np.sum(r * fp_eps.traj.tau))

        numeric = finite_difference(loss, controller.params, eps, relative=True)
        if flips:
            logger.debug("gradcheck: %d perturbed solves left the active set of instance %d", len(flips), attempt)
            continue
        u = fp.traj.u
        return {
            "x_init": x_init,
            "analytic": analytic,
            "numeric": numeric,
            "skipped": attempt,
            "iters_used": fp.iters_used,
            "cost_monotone": bool(np.all(np.diff(fp.cost_history) <= 0.0)),
            "feasible": bool(np.all(u >= fp.u_lower) and np.all(u <= fp.u_upper)),
            "max_rel_error": float(np.max(relative_error(analytic, numeric, ERROR_FLOOR))),
        }
    raise NoConvergedSamples(f"no converged instance with a stable active set in {MAX_ATTEMPTS} attempts")


def random_lqr_problem(dims: Dims, rng: np.random.Generator) -> LqrProblem:
    """Random LQR problem with PD cost Hessians"""
    n, m, T = dims
    nt = n + m
    L = rng.standard_normal((T, nt, nt))
    C = np.einsum("tij,tkj->tik", L, L) + np.eye(nt)
    return LqrProblem(dims, C, rng.standard_normal((T, nt)), rng.standard_normal((T, n, nt)),
                      rng.standard_normal((T, n)), rng.standard_normal(n))


def check_lqr(rng: np.random.Generator, eps: float) -> Dict[str, Any]:
    """Directional-derivative check of lqr_backward on one random problem"""
    dims = Dims(3, 2, 5)
    problem = random_lqr_problem(dims, rng)
    traj, cache = lqr_solve(problem)
    r = rng.standard_normal(traj.tau.shape)
    grads = lqr_backward(problem, traj, lqr_duals(problem, traj), r, cache)

    directions = {
        "C": rng.standard_normal(problem.C.shape),
        "c": rng.standard_normal(problem.c.shape),
        "F": rng.standard_normal(problem.F.shape),
        "f": rng.standard_normal(problem.f.shape),
        "x_init": rng.standard_normal(problem.x_init.shape),
    }
    directions["C"] = 0.5 * (directions["C"] + np.swapaxes(directions["C"], 1, 2))
    analytic_by_field = {"C": grads.dC, "c": grads.dc, "F": grads.dF, "f": grads.df, "x_init": grads.dx_init}

    analytic, numeric = [], []
    for name, direction in directions.items():
        base = getattr(problem, name)

        def loss(s: np.ndarray) -> float:
            moved = problem.replace(**{name: base + s[0] * direction})
            return float(np.sum(r * lqr_solve(moved)[0].tau))

        analytic.append(float(np.sum(analytic_by_field[name] * direction)))
        numeric.append(float(finite_difference(loss, np.zeros(1), eps)[0]))
    analytic, numeric = np.array(analytic), np.array(numeric)
    return {
        "fields": list(directions),
        "analytic": analytic,
        "numeric": numeric,
        "skipped": 0,
        "max_rel_error": float(np.max(relative_error(analytic, numeric, ERROR_FLOOR))),
    }


def gradcheck(env: str = "pendulum", eps: float = 1e-5, seed: int = 0, instances: int = 1,
              tolerance: float = 1e-3) -> Dict[str, Any]:
    """
    Run the gradient check and return a JSON-ready report.

    Returns:
        Dict with env, eps, per-instance results, max_rel_error and passed

    Example:
        >>> report = gradcheck("pendulum")
        >>> report["passed"], report["max_rel_error"]
    """
    rng = np.random.default_rng(seed)
    results: List[Dict[str, Any]] = []
    for _ in range(instances):
        if env == "lqr":
            results.append(check_lqr(rng, eps))
        elif env == "pendulum":
            ctrl = MpcController(Pendulum(PendulumParams()), pendulum_goal_cost(), 20, -2.0, 2.0, CHECK_SETTINGS)
            results.append(check_controller(ctrl, sample_pendulum_state, rng, eps))
        elif env == "cartpole":
            ctrl = MpcController(Cartpole(CartpoleParams()), cartpole_goal_cost(), 20, -2.0, 2.0, CHECK_SETTINGS)
            results.append(check_controller(ctrl, sample_cartpole_state, rng, eps))
        else:
            raise ConfigError(f"unknown gradcheck env {env!r}")
    worst = max(r["max_rel_error"] for r in results)
    passed = bool(worst <= tolerance)
    if passed:
        logger.info("gradcheck %s: max relative error %.3e", env, worst)
    else:
        logger.error("gradcheck %s failed: max relative error %.3e > %.1e", env, worst, tolerance)
    return {
        "env": env,
        "eps": eps,
        "seed": seed,
        "tolerance": tolerance,
        "instances": results,
        "max_rel_error": worst,
        "passed": passed,
    }
