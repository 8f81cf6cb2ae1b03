"""Exception hierarchy. Every error raised on purpose derives from LoclearnError."""


class LoclearnError(Exception):
    pass


class EmptyInput(LoclearnError, ValueError):
    pass


class EmptyDataset(LoclearnError, ValueError):
    pass


class DegenerateScale(LoclearnError, ValueError):
    """The partition scale leaves no room for a full long interval."""


class OutOfDomain(LoclearnError, ValueError):
    pass


class DimensionMismatch(LoclearnError, ValueError):
    pass


class NotLongBox(LoclearnError, ValueError):
    pass


class InconsistentConstraints(LoclearnError, ValueError):
    """Anchor values cannot be L-Lipschitz together with the constraint set."""


class InvalidEpsilon(LoclearnError, ValueError):
    pass


class InvalidLabel(LoclearnError, ValueError):
    pass


class PreconditionViolated(LoclearnError, ValueError):
    pass


class ConfigError(LoclearnError, ValueError):
    """Invalid experiment/service configuration.

    ``errors`` holds ``(field, message)`` pairs so callers can report
    field-level diagnostics.
    """

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors or [])
