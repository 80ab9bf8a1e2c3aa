"""
First-order optimizers over flat parameter vectors

Pure update functions with explicit state, plus a small stateful wrapper.
"""

from typing import NamedTuple, Tuple, Union

import numpy as np

from ..exceptions import ConfigError

EPS = 1e-8


class RmspropState(NamedTuple):
    """Running mean of squared gradients"""
    acc: np.ndarray


class AdamState(NamedTuple):
    """First/second moment estimates and step count"""
    m: np.ndarray
    v: np.ndarray
    step: int


def rmsprop_step(params: np.ndarray, grad: np.ndarray, state: RmspropState, lr: float = 1e-2,
                 decay: float = 0.5, eps: float = EPS) -> Tuple[np.ndarray, RmspropState]:
    """
    acc <- decay acc + (1 - decay) g^2;  theta <- theta - lr g / sqrt(acc + eps)

    Example:
        >>> theta, state = rmsprop_step(np.zeros(1), np.ones(1), RmspropState(np.zeros(1)), 0.01, 0.5)
        >>> state.acc
        array([0.5])
    """
    acc = decay * state.acc + (1.0 - decay) * grad ** 2
    return params - lr * grad / np.sqrt(acc + eps), RmspropState(acc)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float = 1e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = EPS) -> Tuple[np.ndarray, AdamState]:
    """Adam with bias correction; eps is added outside the square root"""
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad ** 2
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, step)


OPTIMIZERS = ("rmsprop", "adam")


class Optimizer:
    """
    Stateful optimizer for one parameter vector.

    Args:
        name: "rmsprop" or "adam"
        learning_rate: Step size
        decay: RMSprop decay (ignored by Adam)
        size: Length of the parameter vector
    """

    def __init__(self, name: str, learning_rate: float, decay: float, size: int):
        if name not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {name!r}")
        self.name = name
        self.learning_rate = learning_rate
        self.decay = decay
        self.state: Union[RmspropState, AdamState]
        if name == "rmsprop":
            self.state = RmspropState(np.zeros(size))
        else:
            self.state = AdamState(np.zeros(size), np.zeros(size), 0)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.name == "rmsprop":
            params, self.state = rmsprop_step(params, grad, self.state, self.learning_rate, self.decay)
        else:
            params, self.state = adam_step(params, grad, self.state, self.learning_rate)
        return params

    def __repr__(self) -> str:
        return f"Optimizer({self.name}, lr={self.learning_rate})"
