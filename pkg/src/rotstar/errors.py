"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the command line runner.
"""


class RotstarError(Exception):
    exit_code = 1


class ConfigError(RotstarError, ValueError):
    """Invalid configuration or parameters outside the admissible range."""

    exit_code = 2


class DomainError(RotstarError, ValueError):
    """Argument outside the domain of a function (e.g. negative density)."""

    exit_code = 2


class ContractViolation(RotstarError, ValueError):
    """A precondition of an operation is not met (parity, grid mismatch...)."""

    exit_code = 2


class IterationDiverged(RotstarError, RuntimeError):
    """A fixed-point iteration failed to reach its tolerance.

    Parameters
    ----------
    message : str
    history : list of float
        Residual or ratio history up to the failure.
    """

    exit_code = 3

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class SolverError(IterationDiverged):
    """A linear solve did not reach its tolerance."""


class DegenerateMetric(RotstarError, ArithmeticError):
    """B1 or B2 non-degeneracy condition violated."""

    exit_code = 3


class BoundaryNotFound(RotstarError, RuntimeError):
    """No sign change of the enthalpy along a ray."""

    exit_code = 3


class DataError(RotstarError, RuntimeError):
    """Computed data violates a structural property (e.g. monotonicity)."""

    exit_code = 3


class ArtifactIOError(RotstarError, OSError):
    """Missing or unreadable artifacts."""

    exit_code = 4
