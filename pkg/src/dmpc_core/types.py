"""
Core type definitions for dmpc_core

Trajectories and problems are immutable: arrays are copied to float64 on
construction and marked read-only. The joint vector tau_t is always ordered
[state; control].
"""

from dataclasses import dataclass, replace as _dc_replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import DimensionError


def frozen_array(value, shape: Optional[Tuple[int, ...]] = None, name: str = "array") -> np.ndarray:
    """
    Copy ``value`` to a read-only float64 array, optionally checking its shape.

    Raises:
        DimensionError: Shape does not match
    """
    arr = np.array(value, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    arr.setflags(write=False)
    return arr


class Dims(NamedTuple):
    """State/control dimensions and horizon length"""
    n_state: int
    n_ctrl: int
    horizon: int

    @property
    def n_tau(self) -> int:
        """Joint dimension of tau_t = [x_t; u_t]"""
        return self.n_state + self.n_ctrl

    def validate(self) -> "Dims":
        """Check every dimension is a positive integer"""
        for name, value in zip(self._fields, self):
            if int(value) != value or value < 1:
                raise DimensionError(f"{name} must be a positive integer, got {value}")
        return self

    def __repr__(self) -> str:
        return f"Dims(n={self.n_state}, m={self.n_ctrl}, T={self.horizon})"


def assemble_tau(x: np.ndarray, u: np.ndarray, dims: Optional[Dims] = None) -> np.ndarray:
    """
    Concatenate a state and a control into the joint vector tau = [x; u].

    Args:
        x: State vector
        u: Control vector
        dims: Optional dimensions to check against

    Raises:
        DimensionError: x or u has the wrong length

    Example:
        >>> assemble_tau(np.array([1.0, 2.0]), np.array([3.0]))
        array([1., 2., 3.])
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.ndim != 1 or u.ndim != 1:
        raise DimensionError("assemble_tau expects 1-d state and control vectors")
    if dims is not None and (x.shape[0] != dims.n_state or u.shape[0] != dims.n_ctrl):
        raise DimensionError(
            f"got x of length {x.shape[0]} and u of length {u.shape[0]} for {dims}"
        )
    return np.concatenate([x, u])


def split_tau(tau: np.ndarray, dims: Dims) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of assemble_tau; works on a single vector or a (T, n_tau) stack"""
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape[-1] != dims.n_tau:
        raise DimensionError(f"tau has trailing size {tau.shape[-1]}, expected {dims.n_tau}")
    return tau[..., :dims.n_state], tau[..., dims.n_state:]


class Trajectory(NamedTuple):
    """Nominal states x (T, n) and controls u (T, m)"""
    x: np.ndarray
    u: np.ndarray

    @classmethod
    def create(cls, x, u) -> "Trajectory":
        """Build a read-only trajectory from array-likes"""
        x = frozen_array(x, name="x")
        u = frozen_array(u, name="u")
        if x.ndim != 2 or u.ndim != 2 or x.shape[0] != u.shape[0]:
            raise DimensionError(f"trajectory needs (T, n) and (T, m) arrays, got {x.shape} and {u.shape}")
        return cls(x, u)

    @property
    def horizon(self) -> int:
        return self.x.shape[0]

    @property
    def tau(self) -> np.ndarray:
        """Stacked joint vectors (T, n_tau)"""
        return np.concatenate([self.x, self.u], axis=1)

    def __repr__(self) -> str:
        return f"Trajectory(T={self.x.shape[0]}, n={self.x.shape[1]}, m={self.u.shape[1]})"


class Duals(NamedTuple):
    """
    Dual variables of the dynamics constraints, lam (T, n).

    ``lam[0]`` multiplies the initial-state constraint x_1 = x_init; ``lam[t]``
    for t >= 1 multiplies the constraint that produces x_t from tau_{t-1}.
    """
    lam: np.ndarray

    @property
    def initial(self) -> np.ndarray:
        """Dual of the initial-state constraint"""
        return self.lam[0]


@dataclass(frozen=True)
class LqrProblem:
    """
    Time-varying LQR problem

        min  sum_t 1/2 tau_t' C_t tau_t + c_t' tau_t
        s.t. x_{t+1} = F_t tau_t + f_t,  x_1 = x_init

    C is symmetrized on construction. F_T and f_T are stored for shape
    uniformity but never read.
    """

    dims: Dims
    C: np.ndarray
    c: np.ndarray
    F: np.ndarray
    f: np.ndarray
    x_init: np.ndarray

    def __post_init__(self) -> None:
        dims = Dims(*self.dims).validate()
        n, T, nt = dims.n_state, dims.horizon, dims.n_tau
        C = np.array(self.C, dtype=np.float64)
        if C.shape != (T, nt, nt):
            raise DimensionError(f"C has shape {C.shape}, expected {(T, nt, nt)}")
        C = 0.5 * (C + np.swapaxes(C, -1, -2))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "C", frozen_array(C, name="C"))
        object.__setattr__(self, "c", frozen_array(self.c, (T, nt), "c"))
        object.__setattr__(self, "F", frozen_array(self.F, (T, n, nt), "F"))
        object.__setattr__(self, "f", frozen_array(self.f, (T, n), "f"))
        object.__setattr__(self, "x_init", frozen_array(self.x_init, (n,), "x_init"))

    def replace(self, **changes) -> "LqrProblem":
        """Copy with some fields replaced"""
        return _dc_replace(self, **changes)

    def differential(self, grad_tau: np.ndarray) -> "LqrProblem":
        """
        Problem whose solution is the backward-pass direction d_tau:
        same C and F, c replaced by the loss gradient, f and x_init zeroed.
        """
        grad_tau = np.asarray(grad_tau, dtype=np.float64)
        expected = (self.dims.horizon, self.dims.n_tau)
        if grad_tau.shape != expected:
            raise DimensionError(f"grad_tau has shape {grad_tau.shape}, expected {expected}")
        return self.replace(c=grad_tau, f=np.zeros_like(self.f), x_init=np.zeros_like(self.x_init))

    def __repr__(self) -> str:
        return f"LqrProblem({self.dims!r})"
