"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """A domain object or scenario violates one of its stated invariants."""


class SchemaError(ValueError):
    """A scenario/gain/grid file does not match the documented schema."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance; no guess is returned."""


class IntegrationError(RuntimeError):
    """The ODE driver aborted; carries the failure reason and time."""

    def __init__(self, message: str, status: int, t_fail: float):
        super().__init__(message)
        self.status = status
        self.t_fail = t_fail
