"""
Cartpole dynamics on x = [pos, vel, cos th, sin th, omega]

th = 0 is the balanced pole. Standard cart-pole equations of motion,
explicit Euler with the pre-step velocities.
"""

from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from ..exceptions import ParameterError
from .base import Dynamics, rotate_angle, unit_angle
from .cost import GoalCost

STATE_SIZE = 5


@dataclass(frozen=True)
class CartpoleParams:
    """Physical constants of the cartpole"""

    cart_mass: float = 1.0  # [kg]
    pole_mass: float = 0.1  # [kg]
    gravity: float = 9.8  # [m/s^2]
    length: float = 0.5  # [m]
    dt: float = 0.05  # [s]

    def __post_init__(self) -> None:
        if min(self.cart_mass, self.pole_mass, self.length) <= 0:
            raise ParameterError("cartpole masses and length must be positive")
        if self.dt <= 0:
            raise ParameterError("dt must be positive")


def _accelerations(params: CartpoleParams, ch: float, sh: float, omega: float, force: float):
    """Cart and pole accelerations with their gradients w.r.t. (cos, sin, omega, u)"""
    total = params.cart_mass + params.pole_mass
    ml = params.pole_mass * params.length
    temp = (force + ml * omega ** 2 * sh) / total
    den = params.length * (4.0 / 3.0 - params.pole_mass * ch ** 2 / total)
    num = params.gravity * sh - ch * temp
    th_acc = num / den
    x_acc = temp - ml * th_acc * ch / total

    e_ch = np.array([1.0, 0.0, 0.0, 0.0])
    e_sh = np.array([0.0, 1.0, 0.0, 0.0])
    d_temp = np.array([0.0, ml * omega ** 2 / total, 2.0 * ml * omega * sh / total, 1.0 / total])
    d_den = np.array([-2.0 * params.length * params.pole_mass * ch / total, 0.0, 0.0, 0.0])
    d_num = params.gravity * e_sh - temp * e_ch - ch * d_temp
    d_th = d_num / den - num * d_den / den ** 2
    d_x = d_temp - (ml / total) * (d_th * ch + th_acc * e_ch)
    return x_acc, th_acc, d_x, d_th


def cartpole_step(params: CartpoleParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    One explicit-Euler step of the cartpole.

    Example:
        >>> cartpole_step(CartpoleParams(), np.array([0.0, 0.0, 1.0, 0.0, 0.0]), np.array([0.0]))
        array([0., 0., 1., 0., 0.])
    """
    pos, vel, c, s, omega = x
    force = float(np.asarray(u).reshape(-1)[0])
    ch, sh, _ = unit_angle(c, s)
    x_acc, th_acc, _, _ = _accelerations(params, ch, sh, omega, force)
    dt = params.dt
    c_next, s_next, _, _ = rotate_angle(ch, sh, dt * omega)
    return np.array([pos + dt * vel, vel + dt * x_acc, c_next, s_next, omega + dt * th_acc])


def sample_cartpole_state(rng: np.random.Generator) -> np.ndarray:
    """pos ~ U[-0.5, 0.5], th ~ U[-pi, pi], velocities ~ U[-0.5, 0.5]"""
    pos, vel, omega = rng.uniform(-0.5, 0.5, size=3)
    th = rng.uniform(-np.pi, np.pi)
    return np.array([pos, vel, np.cos(th), np.sin(th), omega])


def cartpole_goal_cost() -> GoalCost:
    """Default expert cost: pole balanced over the origin, cart at rest"""
    return GoalCost(weights=[0.3, 0.3, 1.0, 1.0, 0.3, 0.1], goal=[0.0, 0.0, 1.0, 0.0, 0.0, 0.0])


class Cartpole(Dynamics):
    """
    Cartpole dynamics with a learnable subset of the physical constants.

    Example:
        >>> dyn = Cartpole(CartpoleParams())
        >>> dyn.param_names
        ('cart_mass', 'pole_mass', 'gravity', 'length')
    """

    n_state = STATE_SIZE
    n_ctrl = 1

    def __init__(self, params: CartpoleParams,
                 learn: Sequence[str] = ("cart_mass", "pole_mass", "gravity", "length")):
        known = {f.name for f in fields(CartpoleParams)} - {"dt"}
        unknown = set(learn) - known
        if unknown:
            raise ParameterError(f"unknown cartpole parameters: {sorted(unknown)}")
        self.physical = params
        self.param_names = tuple(learn)

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return cartpole_step(self.physical, x, u)

    def jacobian(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        params = self.physical
        dt = params.dt
        _, _, c, s, omega = x
        force = float(np.asarray(u).reshape(-1)[0])
        ch, sh, dnorm = unit_angle(c, s)
        _, _, d_x, d_th = _accelerations(params, ch, sh, omega, force)
        c_next, s_next, cp, sp = rotate_angle(ch, sh, dt * omega)

        # columns: (pos, vel, cos_hat, sin_hat, omega, u)
        reduced = np.zeros((STATE_SIZE, STATE_SIZE + 1))
        reduced[0, :2] = [1.0, dt]
        reduced[1, 1] = 1.0
        reduced[1, 2:] = dt * d_x
        reduced[2, 2:5] = [cp, -sp, -dt * s_next]
        reduced[3, 2:5] = [sp, cp, dt * c_next]
        reduced[4, 2:] = dt * d_th
        reduced[4, 4] += 1.0

        F = reduced.copy()
        F[:, 2:4] = reduced[:, 2:4] @ dnorm
        return F

    # ==================== Parameters ====================

    @property
    def params(self) -> np.ndarray:
        return np.array([getattr(self.physical, name) for name in self.param_names], dtype=np.float64)

    def with_params(self, flat: np.ndarray) -> "Cartpole":
        flat = self._check_params(flat)
        physical = replace(self.physical, **{name: float(v) for name, v in zip(self.param_names, flat)})
        return Cartpole(physical, self.param_names)

    def __repr__(self) -> str:
        return f"Cartpole({self.physical})"
