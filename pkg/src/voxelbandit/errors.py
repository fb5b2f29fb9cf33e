# src/voxelbandit/errors.py
"""
Exception hierarchy for voxelbandit.

Validation errors also derive from the matching builtin, so callers that
catch ValueError / IndexError / OSError keep working.
"""

from __future__ import annotations


class VoxelBanditError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(VoxelBanditError, ValueError):
    """Unresolved or unknown configuration keys, invalid values."""


class LengthMismatch(VoxelBanditError, ValueError):
    pass


class ShapeMismatch(VoxelBanditError, ValueError):
    pass


class IndexOutOfRange(VoxelBanditError, IndexError):
    pass


class IncompatibleAlgorithm(VoxelBanditError, TypeError):
    """A gradient optimizer was paired with a non-differentiable environment."""


class EmptyBuffer(VoxelBanditError, LookupError):
    pass


class InsufficientHistory(VoxelBanditError, ValueError):
    pass


class NotSteadyState(VoxelBanditError, RuntimeError):
    """Flux requested before the source ramp finished or before a full period."""


class SimulationDiverged(VoxelBanditError, ArithmeticError):
    pass


class BudgetExceeded(VoxelBanditError, RuntimeError):
    """Raised by the counting wrapper when an optimizer over-spends."""


class DesignFormatError(VoxelBanditError, ValueError):
    """Malformed PBD design, field snapshot or checkpoint."""


class IoError(VoxelBanditError, OSError):
    pass
