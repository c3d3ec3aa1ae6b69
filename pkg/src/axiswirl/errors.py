"""Exception hierarchy shared by every module of the package."""


class AxiswirlError(Exception):
    """Base class for all errors raised by axiswirl."""


class ConfigurationError(AxiswirlError, ValueError):
    """Invalid grid, scenario or run configuration."""


class DomainError(AxiswirlError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class DataError(AxiswirlError, ValueError):
    """Input data violates a structural hypothesis (e.g. density on the axis)."""


class ContractViolation(AxiswirlError, ValueError):
    """Operator applied to a field with the wrong location or parity."""


class SolverError(AxiswirlError, RuntimeError):
    """An elliptic solve failed to reach its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StepRejected(AxiswirlError, RuntimeError):
    """A time step produced an invalid state (CFL violation, non-finite values)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
