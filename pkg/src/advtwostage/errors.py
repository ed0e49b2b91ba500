"""Exception hierarchy shared by every module in the package."""

import numpy as np


class AdvTwoStageError(Exception):
    """Base class for all package errors."""


class ArgumentError(AdvTwoStageError, ValueError):
    """An argument is outside its valid domain."""


class SingularSystemError(AdvTwoStageError, np.linalg.LinAlgError):
    """A linear system that must be solved is rank deficient."""


class DegenerateLeverageError(AdvTwoStageError, ValueError):
    """A leave-one-out update was requested for a sample with leverage >= 1."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PoleError(AdvTwoStageError, ZeroDivisionError):
    """An asymptotic limit was requested exactly at a pole."""


class DegenerateContextError(AdvTwoStageError, ValueError):
    """The shortcut coefficients are undefined for the given inputs."""


class NumericError(AdvTwoStageError, FloatingPointError):
    """A non-finite value appeared during an iterative solve."""


class SelectionError(AdvTwoStageError, ValueError):
    """No grid point produced a usable cross-validation value."""


class ConfigError(AdvTwoStageError, ValueError):
    """A configuration key is unknown, missing, or has the wrong type."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
