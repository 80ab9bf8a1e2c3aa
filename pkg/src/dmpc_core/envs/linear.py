"""
Linear dynamics f(x, u) = A x + B u with theta = {A, B}
"""

import numpy as np

from ..types import frozen_array
from ..exceptions import DimensionError
from .base import Dynamics


class LinearDynamics(Dynamics):
    """
    Linear time-invariant dynamics.

    Parameters flatten as [A.ravel(), B.ravel()] (row-major).

    Example:
        >>> dyn = LinearDynamics(np.eye(2), np.ones((2, 1)))
        >>> dyn(np.zeros(2), np.array([1.0]))
        array([1., 1.])
    """

    param_names = ("A", "B")

    def __init__(self, A: np.ndarray, B: np.ndarray):
        A = frozen_array(A, name="A")
        B = frozen_array(B, name="B")
        if A.ndim != 2 or A.shape[0] != A.shape[1] or B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionError(f"need A (n, n) and B (n, m), got {A.shape} and {B.shape}")
        self.A, self.B = A, B
        self.n_state, self.n_ctrl = B.shape

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ u

    def jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.hstack([self.A, self.B])

    # ==================== Parameters ====================

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.B.ravel()])

    def with_params(self, flat: np.ndarray) -> "LinearDynamics":
        flat = self._check_params(flat)
        n, m = self.n_state, self.n_ctrl
        return LinearDynamics(flat[:n * n].reshape(n, n), flat[n * n:].reshape(n, m))

    def param_jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        eye = np.eye(self.n_state)
        return np.hstack([np.kron(eye, np.asarray(x)[None, :]), np.kron(eye, np.asarray(u)[None, :])])

    def param_adjoint(self, tau: np.ndarray, dF: np.ndarray, df: np.ndarray) -> np.ndarray:
        # the affine offset f - F tau vanishes identically, only dF contributes
        n = self.n_state
        total = dF.sum(axis=0)
        return np.concatenate([total[:, :n].ravel(), total[:, n:].ravel()])

    def curvature(self, x: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        size = self.n_state + self.n_ctrl
        return np.zeros((size, size))

    def __repr__(self) -> str:
        return f"LinearDynamics(n={self.n_state}, m={self.n_ctrl})"
