"""Dynamics models and costs used by the controllers and experiments"""

from .base import Cost, Dynamics, Parameterized
from .cartpole import Cartpole, CartpoleParams, cartpole_goal_cost, cartpole_step, sample_cartpole_state
from .cost import GoalCost, QuadraticCost, goal_cost_expansion
from .linear import LinearDynamics
from .pendulum import Pendulum, PendulumParams, pendulum_goal_cost, pendulum_step, sample_pendulum_state
