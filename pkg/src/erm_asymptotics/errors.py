"""Exception hierarchy shared by all modules."""


class ErmAsymptoticsError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ErmAsymptoticsError, ValueError):
    """An argument lies outside the domain of a scalar function."""


class ZeroLikelihoodError(ErmAsymptoticsError, ValueError):
    """A label has zero probability under the channel, so log-derivatives are undefined."""


class InvariantError(ErmAsymptoticsError, ArithmeticError):
    """A state violates a mathematical invariant beyond floating-point tolerance."""


class SolverError(ErmAsymptoticsError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes:
        residual: last residual reached before giving up.
        trajectory: optional list of intermediate iterates.
    """

    def __init__(self, message: str, residual: float = float("nan"), trajectory=None):
        super().__init__(message)
        self.residual = residual
        self.trajectory = trajectory if trajectory is not None else []


class ConfigError(ErmAsymptoticsError, ValueError):
    """Invalid experiment configuration."""
