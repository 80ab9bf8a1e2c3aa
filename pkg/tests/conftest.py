"""
Shared builders and reference oracles for the test suite
"""

import itertools

import numpy as np
import pytest

from dmpc_core.envs.cost import QuadraticCost
from dmpc_core.envs.linear import LinearDynamics
from dmpc_core.solvers.boxqp import BoxQp
from dmpc_core.solvers.mpc import MpcProblem, SolverSettings
from dmpc_core.types import Dims, Duals, LqrProblem, Trajectory

# tight settings so finite differences through mpc_solve resolve the fixed point
TIGHT = SolverSettings(max_iters=500, convergence_tol=1e-12, stationarity_tol=1e-10,
                       qp_grad_tol=1e-13, qp_step_tol=1e-15, stagnation_tol=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pd(size: int, rng: np.random.Generator, shift: float = 1.0) -> np.ndarray:
    L = rng.standard_normal((size, size))
    return L @ L.T + shift * np.eye(size)


def random_lqr_problem(dims: Dims, rng: np.random.Generator) -> LqrProblem:
    n, m, T = dims
    nt = n + m
    C = np.stack([random_pd(nt, rng) for _ in range(T)])
    return LqrProblem(
        dims,
        C,
        rng.standard_normal((T, nt)),
        0.5 * rng.standard_normal((T, n, nt)),
        rng.standard_normal((T, n)),
        rng.standard_normal(n),
    )


def random_dims(rng: np.random.Generator, max_n: int = 3, max_m: int = 2, max_T: int = 5) -> Dims:
    return Dims(int(rng.integers(1, max_n + 1)), int(rng.integers(1, max_m + 1)), int(rng.integers(1, max_T + 1)))


def dense_kkt_solve(problem: LqrProblem):
    """
    Solve the LQR problem as one dense equality-constrained QP.

    Returns (Trajectory, Duals) in the library's sign convention.
    """
    n, m, T = problem.dims
    nt = n + m
    N = T * nt
    H = np.zeros((N, N))
    g = np.zeros(N)
    for t in range(T):
        s = slice(t * nt, (t + 1) * nt)
        H[s, s] = problem.C[t]
        g[s] = problem.c[t]

    E = np.zeros((T * n, N))
    h = np.zeros(T * n)
    E[:n, :n] = np.eye(n)
    h[:n] = problem.x_init
    for t in range(T - 1):
        rows = slice((t + 1) * n, (t + 2) * n)
        E[rows, (t + 1) * nt:(t + 1) * nt + n] = np.eye(n)
        E[rows, t * nt:(t + 1) * nt] = -problem.F[t]
        h[rows] = problem.f[t]

    K = np.block([[H, E.T], [E, np.zeros((T * n, T * n))]])
    sol = np.linalg.solve(K, np.concatenate([-g, h]))
    tau = sol[:N].reshape(T, nt)
    lam = -sol[N:].reshape(T, n)
    return Trajectory.create(tau[:, :n], tau[:, n:]), Duals(lam)


def enumerate_box_qp(qp: BoxQp) -> np.ndarray:
    """Exact box-QP minimizer by enumerating every free/lower/upper assignment"""
    k = qp.size
    best, best_val = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=k):
        pattern = np.array(pattern)
        x = np.where(pattern == 1, qp.lower, np.where(pattern == 2, qp.upper, 0.0))
        free = pattern == 0
        if free.any():
            fixed = ~free
            rhs = -(qp.p[free] + qp.Q[np.ix_(free, fixed)] @ x[fixed])
            x[free] = np.linalg.solve(qp.Q[np.ix_(free, free)], rhs)
        if np.any(x < qp.lower - 1e-12) or np.any(x > qp.upper + 1e-12):
            continue
        value = qp.objective(x)
        if value < best_val:
            best, best_val = x, value
    return best


def random_box_qp(rng: np.random.Generator, k: int, bound: float = 1.0) -> BoxQp:
    lower = -bound * rng.uniform(0.2, 1.0, size=k)
    upper = bound * rng.uniform(0.2, 1.0, size=k)
    return BoxQp(random_pd(k, rng, 0.5), 3.0 * rng.standard_normal(k), lower, upper)


def linear_box_problem(rng: np.random.Generator, dims: Dims = Dims(3, 2, 6), bound: float = 0.5,
                       settings: SolverSettings = TIGHT) -> MpcProblem:
    """Box-constrained linear-quadratic MPC problem"""
    n, m, T = dims
    A = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    cost = QuadraticCost(random_pd(n + m, rng), 0.1 * rng.standard_normal(n + m))
    return MpcProblem(dims, cost, LinearDynamics(A, B), -bound, bound, x_init=2.0 * rng.standard_normal(n),
                      settings=settings)
