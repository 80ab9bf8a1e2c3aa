"""
Utility functions for dmpc_core

Central finite differences (used as default Jacobian/adjoint providers and as
test oracles), error metrics and environment-variable helpers.
"""

import logging
import os
from pathlib import Path
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "DMPC_OUTPUT_DIR"
LOG_LEVEL_ENV = "DMPC_LOG_LEVEL"


def finite_difference(func: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, eps: float = 1e-6,
                      relative: bool = False) -> np.ndarray:
    """
    Central-difference Jacobian of ``func`` at ``x0``.

    Args:
        func: Maps a 1-d array to a scalar or an array
        x0: Point of evaluation
        eps: Step size
        relative: Scale the step by max(1, |x0_j|) per coordinate

    Returns:
        Array of shape func(x0).shape + (len(x0),); a 1-d gradient for scalar
        functions

    Example:
        >>> finite_difference(lambda x: x @ x, np.array([1.0, 2.0]))
        array([2., 4.])
    """
    x0 = np.asarray(x0, dtype=np.float64)
    columns = []
    for j in range(x0.shape[0]):
        h = eps * max(1.0, abs(x0[j])) if relative else eps
        x = x0.copy()
        x[j] = x0[j] + h
        f_plus = np.asarray(func(x), dtype=np.float64)
        x[j] = x0[j] - h
        f_minus = np.asarray(func(x), dtype=np.float64)
        columns.append((f_plus - f_minus) / (2.0 * h))
    if not columns:
        return np.zeros(np.shape(func(x0)) + (0,))
    return np.stack(columns, axis=-1)


def relative_error(actual: np.ndarray, expected: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """
    Entrywise |actual - expected| / max(|expected|, floor).

    Example:
        >>> relative_error(np.array([1.01]), np.array([1.0]))
        array([0.01])
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    return np.abs(actual - expected) / np.maximum(np.abs(expected), floor)


def max_relative_error(actual: np.ndarray, expected: np.ndarray, floor: float = 1e-6) -> float:
    """Largest entry of relative_error, 0.0 for empty arrays"""
    err = relative_error(actual, expected, floor)
    return float(err.max()) if err.size else 0.0


def output_dir_override() -> Optional[Path]:
    """
    Output directory from the DMPC_OUTPUT_DIR environment variable.

    Returns:
        Path, or None when the variable is unset or empty
    """
    value = os.environ.get(OUTPUT_DIR_ENV)
    return Path(value) if value else None


def log_level_from_env(default: int = logging.WARNING) -> int:
    """
    Log level named by DMPC_LOG_LEVEL (e.g. "INFO"), falling back to ``default``.
    """
    name = os.environ.get(LOG_LEVEL_ENV, "").upper()
    level = logging.getLevelName(name) if name else default
    if not isinstance(level, int):
        logger.warning("Ignoring unknown %s=%r", LOG_LEVEL_ENV, name)
        return default
    return level
