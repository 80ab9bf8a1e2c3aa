"""
Pendulum dynamics on the smooth angle embedding x = [cos th, sin th, omega]

th = 0 is upright. The expert variant adds linear damping and a horizontal
"wind" force on the point mass; learner-class instances keep both at zero.
"""

from dataclasses import dataclass, fields, replace
from typing import Sequence, Tuple

import numpy as np

from ..exceptions import ParameterError
from .base import Dynamics, rotate_angle, unit_angle
from .cost import GoalCost

STATE_SIZE = 3


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants of the pendulum"""

    mass: float = 1.0  # [kg]
    length: float = 1.0  # [m]
    gravity: float = 10.0  # [m/s^2]
    damping: float = 0.0  # [1/s]
    wind: float = 0.0  # [N] horizontal force on the point mass
    dt: float = 0.05  # [s]

    def __post_init__(self) -> None:
        if self.mass <= 0 or self.length <= 0:
            raise ParameterError("pendulum mass and length must be positive")
        if self.gravity < 0:
            raise ParameterError("pendulum gravity must be non-negative")
        if self.dt <= 0:
            raise ParameterError("dt must be positive")

    @property
    def realizable(self) -> bool:
        """True for the learner model class (no damping, no wind)"""
        return self.damping == 0.0 and self.wind == 0.0


def _angular_acceleration(params: PendulumParams) -> Tuple[float, float, float]:
    alpha = 3.0 * params.gravity / (2.0 * params.length)
    beta = 3.0 / (params.mass * params.length ** 2)
    gamma = 3.0 * params.wind / (params.mass * params.length)
    return alpha, beta, gamma


def pendulum_step(params: PendulumParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    One explicit-Euler step of

        th'' = 3g/(2l) sin th + 3u/(m l^2) - b omega + 3w/(m l) cos th

    with the angle advanced by the pre-step omega and re-embedded as (cos, sin).

    Example:
        >>> pendulum_step(PendulumParams(), np.array([1.0, 0.0, 0.0]), np.array([0.0]))
        array([1., 0., 0.])
    """
    c, s, omega = x
    torque = float(np.asarray(u).reshape(-1)[0])
    ch, sh, _ = unit_angle(c, s)
    alpha, beta, gamma = _angular_acceleration(params)
    acc = alpha * sh + beta * torque - params.damping * omega + gamma * ch
    c_next, s_next, _, _ = rotate_angle(ch, sh, params.dt * omega)
    return np.array([c_next, s_next, omega + params.dt * acc])


def sample_pendulum_state(rng: np.random.Generator) -> np.ndarray:
    """Initial state with th ~ U[-pi, pi], omega ~ U[-1, 1]"""
    th = rng.uniform(-np.pi, np.pi)
    return np.array([np.cos(th), np.sin(th), rng.uniform(-1.0, 1.0)])


def pendulum_goal_cost() -> GoalCost:
    """Default expert cost: upright, at rest, small control penalty"""
    return GoalCost(weights=[1.0, 1.0, 0.3, 0.1], goal=[1.0, 0.0, 0.0, 0.0])


class Pendulum(Dynamics):
    """
    Pendulum dynamics with a learnable subset of the physical constants.

    Args:
        params: Physical constants
        learn: Names of the PendulumParams fields exposed as theta

    Example:
        >>> expert = Pendulum(PendulumParams(damping=0.1, wind=0.5))
        >>> learner = Pendulum(PendulumParams(mass=1.3))
        >>> learner.params
        array([ 1.3,  1. , 10. ])
    """

    n_state = STATE_SIZE
    n_ctrl = 1

    def __init__(self, params: PendulumParams, learn: Sequence[str] = ("mass", "length", "gravity")):
        known = {f.name for f in fields(PendulumParams)} - {"dt"}
        unknown = set(learn) - known
        if unknown:
            raise ParameterError(f"unknown pendulum parameters: {sorted(unknown)}")
        self.physical = params
        self.param_names = tuple(learn)

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return pendulum_step(self.physical, x, u)

    def jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        params = self.physical
        c, s, omega = x
        ch, sh, dnorm = unit_angle(c, s)
        alpha, beta, gamma = _angular_acceleration(params)
        dt = params.dt
        c_next, s_next, cp, sp = rotate_angle(ch, sh, dt * omega)

        # columns: (cos_hat, sin_hat, omega, u)
        reduced = np.array([
            [cp, -sp, -dt * s_next, 0.0],
            [sp, cp, dt * c_next, 0.0],
            [dt * gamma, dt * alpha, 1.0 - dt * params.damping, dt * beta],
        ])
        F = np.empty((STATE_SIZE, STATE_SIZE + 1))
        F[:, :2] = reduced[:, :2] @ dnorm
        F[:, 2:] = reduced[:, 2:]
        return F

    # ==================== Parameters ====================

    @property
    def params(self) -> np.ndarray:
        return np.array([getattr(self.physical, name) for name in self.param_names], dtype=np.float64)

    def with_params(self, flat: np.ndarray) -> "Pendulum":
        flat = self._check_params(flat)
        physical = replace(self.physical, **{name: float(v) for name, v in zip(self.param_names, flat)})
        return Pendulum(physical, self.param_names)

    def __repr__(self) -> str:
        return f"Pendulum({self.physical})"
