"""
Exception hierarchy for dmpc_core

All exceptions inherit from CoreError for easy catching.
"""

from typing import Any, Dict, Optional

import numpy as np


class CoreError(Exception):
    """Base exception for all core errors"""
    pass


class DimensionError(CoreError, ValueError):
    """Array shapes do not match the problem dimensions"""
    pass


class NotPositiveDefinite(CoreError):
    """Cholesky factorization failed; the caller may regularize and retry"""

    def __init__(self, message: str, timestep: Optional[int] = None):
        super().__init__(message)
        self.timestep = timestep


class BoxQpError(CoreError):
    """Projected-Newton box-QP solver hit its iteration cap"""

    def __init__(self, message: str, x: np.ndarray, residual: float):
        super().__init__(message)
        self.x = x
        self.residual = residual


class NotAFixedPoint(CoreError):
    """Differentiation requested through a solve that did not converge"""
    pass


class ParameterError(CoreError, ValueError):
    """Parameter vector does not match the model's parameter structure"""
    pass


class NoConvergedSamples(CoreError):
    """Every element of a batch was dropped because its solve did not converge"""
    pass


class TrainingDiverged(CoreError):
    """Loss or parameters became non-finite during training"""

    def __init__(self, message: str, epoch: int, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.epoch = epoch
        self.diagnostics = diagnostics or {}


class ConfigError(CoreError, ValueError):
    """Solver or experiment configuration is invalid"""
    pass
