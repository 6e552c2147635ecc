"""Exception types raised across the package."""


class DegenerateSupportError(ArithmeticError):
    """Every candidate label for an event has zero weight."""

    def __init__(self, event, message=None):
        self.event = event
        super().__init__(message or f"event {event}: all parent/layer weights are zero")


class SupercriticalError(RuntimeError):
    """Cascade simulation produced more events than the configured cap."""

    def __init__(self, cap):
        self.cap = cap
        super().__init__(
            f"simulation exceeded max_events={cap}; influence tensor is likely supercritical"
        )


class EmptySupportError(ValueError):
    pass


class UndefinedAUCError(ValueError):
    pass


class MalformedInputError(ValueError):
    """A data file could not be parsed. Carries the file and line number."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")
