"""
Quadratic costs: a fixed (C, c) cost and the weighted goal-distance cost

    C(tau) = || w o (tau - tau_g) ||^2
"""

from typing import Tuple

import numpy as np

from ..exceptions import DimensionError
from ..types import frozen_array
from .base import Cost


class QuadraticCost(Cost):
    """
    Time-invariant quadratic cost 1/2 tau' C tau + c' tau.

    Parameters flatten as [C.ravel(), c].

    Example:
        >>> cost = QuadraticCost(np.eye(2), np.zeros(2))
        >>> cost(np.array([1.0, 1.0]), 0)
        1.0
    """

    param_names = ("C", "c")

    def __init__(self, C: np.ndarray, c: np.ndarray):
        C = np.asarray(C, dtype=np.float64)
        c = frozen_array(c, name="c")
        if C.shape != (c.shape[0], c.shape[0]):
            raise DimensionError(f"C has shape {C.shape}, expected {(c.shape[0], c.shape[0])}")
        self.C = frozen_array(0.5 * (C + C.T), name="C")
        self.c = c

    def __call__(self, tau: np.ndarray, t: int) -> float:
        return float(0.5 * tau @ self.C @ tau + self.c @ tau)

    def expansion(self, tau: np.ndarray, t: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.C.copy(), self.C @ tau + self.c

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.C.ravel(), self.c])

    def with_params(self, flat: np.ndarray) -> "QuadraticCost":
        flat = self._check_params(flat)
        k = self.c.shape[0]
        return QuadraticCost(flat[:k * k].reshape(k, k), flat[k * k:])

    def param_adjoint(self, tau: np.ndarray, dC: np.ndarray, dc: np.ndarray) -> np.ndarray:
        # absolute linear term p - H tau is c itself
        return np.concatenate([dC.sum(axis=0).ravel(), dc.sum(axis=0)])


class GoalCost(Cost):
    """
    Weighted squared distance to a goal, C(tau) = sum_i w_i^2 (tau_i - g_i)^2.

    The weights enter squared, so theta = [w, tau_g] is unconstrained and the
    gradient with respect to w is 2 w o dloss/d(w^2).

    Example:
        >>> cost = GoalCost(weights=[1.0, 1.0], goal=[0.0, 0.0])
        >>> cost(np.array([1.0, 2.0]), 0)
        5.0
    """

    param_names = ("weights", "goal")

    def __init__(self, weights, goal):
        self.weights = frozen_array(weights, name="weights")
        self.goal = frozen_array(goal, self.weights.shape, name="goal")
        if self.weights.ndim != 1:
            raise DimensionError("goal cost weights must be a vector")

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def __call__(self, tau: np.ndarray, t: int) -> float:
        r = self.weights * (np.asarray(tau) - self.goal)
        return float(r @ r)

    def expansion(self, tau: np.ndarray, t: int) -> Tuple[np.ndarray, np.ndarray]:
        return goal_cost_expansion(self, tau)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.weights, self.goal])

    def with_params(self, flat: np.ndarray) -> "GoalCost":
        flat = self._check_params(flat)
        return GoalCost(flat[:self.size], flat[self.size:])

    def param_adjoint(self, tau: np.ndarray, dC: np.ndarray, dc: np.ndarray) -> np.ndarray:
        # H = 2 diag(w^2), absolute linear term c = p - H tau = -2 w^2 o tau_g
        q = self.weights ** 2
        diag_dC = np.einsum("tii->i", dC)
        sum_dc = dc.sum(axis=0)
        d_q = 2.0 * diag_dC - 2.0 * self.goal * sum_dc
        d_goal = -2.0 * q * sum_dc
        return np.concatenate([2.0 * self.weights * d_q, d_goal])

    def __repr__(self) -> str:
        return f"GoalCost(size={self.size})"


def goal_cost_expansion(cost: GoalCost, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact quadratic expansion of the goal cost.

    Returns:
        (H, p) with H = 2 diag(w^2) and p = 2 diag(w^2)(tau - tau_g)

    Example:
        >>> H, p = goal_cost_expansion(GoalCost([1.0, 1.0], [0.0, 0.0]), np.zeros(2))
        >>> H
        array([[2., 0.],
               [0., 2.]])
    """
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != cost.goal.shape:
        raise DimensionError(f"tau has shape {tau.shape}, expected {cost.goal.shape}")
    q2 = 2.0 * cost.weights ** 2
    return np.diag(q2), q2 * (tau - cost.goal)
