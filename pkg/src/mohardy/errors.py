"""Exception types shared across the package."""


class MoHardyError(Exception):
    """Base class."""


class DomainError(MoHardyError, ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(MoHardyError, ValueError):
    """A stated precondition on the input does not hold."""


class ResolutionError(MoHardyError, ValueError):
    """The grid is too coarse for the requested construction."""


class DegenerateWeightError(MoHardyError, ArithmeticError):
    """A Gram system is numerically singular."""


class IncompleteDecompositionError(MoHardyError, RuntimeError):
    """The level range never reaches an empty superlevel set."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotAGrowthFunctionError(MoHardyError, ValueError):
    """No lower type exponent in (0, 1] passes on the samples."""


class ConfigError(MoHardyError, ValueError):
    """An experiment configuration fails to parse or validate."""
