"""
Base classes for parameterized dynamics and costs

Subclasses implement the forward map and (ideally) an analytic Jacobian /
expansion. Parameter adjoints, parameter Jacobians and dynamics curvature
default to central finite differences, which is cheap at the handful of
physical parameters used here; subclasses override them where a closed form
is available.
"""

from typing import Tuple

import numpy as np

from ..exceptions import DimensionError, ParameterError
from ..utils import finite_difference

FD_EPS = 1e-6


class Parameterized:
    """Flat parameter vector API shared by dynamics and costs"""

    param_names: Tuple[str, ...] = ()

    @property
    def params(self) -> np.ndarray:
        """Current parameters as a flat float64 vector"""
        return np.zeros(0)

    def with_params(self, flat: np.ndarray) -> "Parameterized":
        """Copy of this model with the flat parameter vector replaced"""
        if np.size(flat):
            raise ParameterError(f"{type(self).__name__} has no parameters")
        return self

    def _check_params(self, flat: np.ndarray) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.float64).ravel()
        expected = self.params.shape[0]
        if flat.shape[0] != expected:
            raise ParameterError(
                f"{type(self).__name__} expects {expected} parameters, got {flat.shape[0]}"
            )
        return flat


class Dynamics(Parameterized):
    """
    Discrete-time dynamics x_{t+1} = f(x_t, u_t; theta).

    Example:
        >>> dyn = Pendulum(PendulumParams())
        >>> x_next = dyn(np.array([1.0, 0.0, 0.0]), np.array([0.5]))
        >>> F = dyn.jacobian(np.array([1.0, 0.0, 0.0]), np.array([0.5]))
    """

    n_state: int = 0
    n_ctrl: int = 0

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """F = d f / d [x; u], shape (n_state, n_tau)"""
        n = self.n_state
        return finite_difference(lambda tau: self(tau[:n], tau[n:]), np.concatenate([x, u]), FD_EPS)

    def linearize(self, x: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Affine model at (x, u): returns (F, f_off) with
        f(x', u') ~= F [x'; u'] + f_off.
        """
        F = self.jacobian(x, u)
        return F, self(x, u) - F @ np.concatenate([x, u])

    def param_jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """d f / d theta, shape (n_state, n_params)"""
        return finite_difference(lambda th: self.with_params(th)(x, u), self.params, FD_EPS, relative=True)

    def param_adjoint(self, tau: np.ndarray, dF: np.ndarray, df: np.ndarray) -> np.ndarray:
        """
        Contract expansion-level gradients with theta-derivatives of the
        linearization, holding the trajectory fixed:

            d/dtheta  sum_t <dF_t, F_t(theta)> + <df_t, f(tau_t; theta) - F_t(theta) tau_t>
        """
        n = self.n_state
        steps = [t for t in range(tau.shape[0]) if np.any(dF[t]) or np.any(df[t])]

        def contraction(theta: np.ndarray) -> float:
            model = self.with_params(theta)
            total = 0.0
            for t in steps:
                F, f_off = model.linearize(tau[t, :n], tau[t, n:])
                total += float(np.sum(dF[t] * F) + df[t] @ f_off)
            return total

        return finite_difference(contraction, self.params, FD_EPS, relative=True)

    def curvature(self, x: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """
        Dual-weighted second derivative sum_i lam_i * d^2 f_i / d tau^2,
        shape (n_tau, n_tau), symmetrized.
        """
        n = self.n_state
        lam = np.asarray(lam, dtype=np.float64)
        if lam.shape != (n,):
            raise DimensionError(f"lam has shape {lam.shape}, expected {(n,)}")
        hess = finite_difference(
            lambda tau: self.jacobian(tau[:n], tau[n:]).T @ lam, np.concatenate([x, u]), FD_EPS
        )
        return 0.5 * (hess + hess.T)

    def rollout(self, x_init: np.ndarray, u: np.ndarray) -> np.ndarray:
        """States (T, n) produced by applying controls u (T, m) from x_init"""
        T = u.shape[0]
        x = np.zeros((T, self.n_state))
        x[0] = x_init
        for t in range(T - 1):
            x[t + 1] = self(x[t], u[t])
        return x


class Cost(Parameterized):
    """
    Per-timestep cost C(tau_t, t; theta) with a quadratic expansion provider.
    """

    def __call__(self, tau: np.ndarray, t: int) -> float:
        raise NotImplementedError

    def expansion(self, tau: np.ndarray, t: int) -> Tuple[np.ndarray, np.ndarray]:
        """(H, p): Hessian and gradient of the cost at tau"""
        raise NotImplementedError

    def param_adjoint(self, tau: np.ndarray, dC: np.ndarray, dc: np.ndarray) -> np.ndarray:
        """
        d/dtheta sum_t <dC_t, H_t(theta)> + <dc_t, p_t(theta) - H_t(theta) tau_t>,
        trajectory held fixed.
        """

        def contraction(theta: np.ndarray) -> float:
            model = self.with_params(theta)
            total = 0.0
            for t in range(tau.shape[0]):
                H, p = model.expansion(tau[t], t)
                total += float(np.sum(dC[t] * H) + dc[t] @ (p - H @ tau[t]))
            return total

        return finite_difference(contraction, self.params, FD_EPS, relative=True)


# ==================== Angle embedding ====================

def unit_angle(c: float, s: float) -> Tuple[float, float, np.ndarray]:
    """Normalize (cos, sin) and return the 2x2 Jacobian of the normalization"""
    r = np.hypot(c, s)
    ch, sh = c / r, s / r
    dnorm = np.array([[sh * sh, -ch * sh], [-ch * sh, ch * ch]]) / r
    return ch, sh, dnorm


def rotate_angle(ch: float, sh: float, phi: float) -> Tuple[float, float, float, float]:
    """(cos, sin) of th + phi, plus cos phi and sin phi"""
    cp, sp = np.cos(phi), np.sin(phi)
    return ch * cp - sh * sp, sh * cp + ch * sp, cp, sp
