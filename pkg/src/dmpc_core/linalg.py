"""
Dense positive-definite solves with reusable Cholesky factorizations
"""

from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DimensionError, NotPositiveDefinite


class PdFactor:
    """
    Cholesky factorization of a symmetric positive-definite matrix.

    Keeps the factor so later right-hand sides reuse it.

    Example:
        >>> factor = factorize_pd(np.array([[4.0, 1.0], [1.0, 3.0]]))
        >>> x = factor.solve(np.array([1.0, 2.0]))
    """

    __slots__ = ("_cho", "size")

    def __init__(self, cho):
        self._cho = cho
        self.size = cho[0].shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A X = b for a vector or a matrix of right-hand sides"""
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.size:
            raise DimensionError(f"right-hand side has {b.shape[0]} rows, factor has {self.size}")
        if self.size == 0:
            return np.zeros_like(b)
        return cho_solve(self._cho, b, check_finite=False)

    def __repr__(self) -> str:
        return f"PdFactor(size={self.size})"


def factorize_pd(A: np.ndarray, timestep: Optional[int] = None) -> PdFactor:
    """
    Cholesky-factorize a symmetric positive-definite matrix.

    Args:
        A: Square matrix (only its lower triangle is read)
        timestep: Reported in the error when called inside a recursion

    Raises:
        NotPositiveDefinite: A is not positive definite
        DimensionError: A is not square
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        return PdFactor((np.zeros((0, 0)), True))
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite("matrix has non-finite entries", timestep=timestep)
    try:
        cho = cho_factor(A, lower=True, check_finite=False)
    except LinAlgError as e:
        where = f" at timestep {timestep}" if timestep is not None else ""
        raise NotPositiveDefinite(f"matrix is not positive definite{where}: {e}", timestep=timestep) from e
    return PdFactor(cho)


def solve_pd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Solve A X = B for symmetric positive-definite A.

    Example:
        >>> solve_pd(np.array([[2.0]]), np.array([[6.0]]))
        array([[3.]])
    """
    return factorize_pd(A).solve(B)
