"""Exception hierarchy shared by every qdiag module."""


class QDiagError(Exception):
    """Base class for all qdiag errors."""


class ConfigurationError(QDiagError, ValueError):
    """A parameter or configuration value is out of range or inconsistent."""


class DivergenceError(QDiagError, FloatingPointError):
    """Q-values or a training loss stopped being finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NormalizationError(QDiagError, ZeroDivisionError):
    """The expert return of an environment is zero, so nothing can be normalized."""


class UnsupportedOperationError(QDiagError, TypeError):
    """The operation is not defined for this kind of function approximator."""
