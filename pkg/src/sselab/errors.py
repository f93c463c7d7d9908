"""Exception hierarchy shared by the simulation, oracle and CLI layers."""

from __future__ import annotations


class SSEError(Exception):
    """Base class for every error raised by :mod:`sselab`."""


class DimensionMismatch(SSEError, ValueError):
    pass


class ZeroNorm(SSEError, ArithmeticError):
    """A state vector collapsed to (numerically) zero norm or went non-finite."""


class InvalidParameter(SSEError, ValueError):
    pass


class ParameterDomain(InvalidParameter):
    """Parameters fall outside the domain where a closed form or ODE reduction holds."""


class MultiChannelUnsupported(SSEError, ValueError):
    pass


class IntegrationFailure(SSEError, ArithmeticError):
    pass


class InsufficientSamples(SSEError, ValueError):
    pass


class GridMismatch(SSEError, ValueError):
    pass


class StepFailure(SSEError):
    """A trajectory could not be advanced.

    Carries the trajectory (stream) index and the step index at which the
    failure happened; the underlying error is chained as ``__cause__``.
    """

    def __init__(self, message: str, trajectory: int | None, step: int):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step


class AbortRateExceeded(SSEError):
    def __init__(self, aborted: int, total: int):
        super().__init__(
            f"{aborted} of {total} trajectories aborted (limit is 0.1%)"
        )
        self.aborted = aborted
        self.total = total


class ConfigError(SSEError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
