"""Exception types raised by vatrack."""


class VatrackError(Exception):
    """Base class for all package errors."""


class NotUnitQuaternion(VatrackError, ValueError):
    pass


class ZeroQuaternion(VatrackError, ValueError):
    pass


class CollinearReferences(VatrackError, ValueError):
    """Fewer than two noncollinear reference vectors, so W is singular."""


class InvalidInertia(VatrackError, ValueError):
    pass


class NumericalDivergence(VatrackError, ArithmeticError):
    """The integrated state became non-finite (or left its admissible range)."""

    def __init__(self, message, step=None, t=None):
        super().__init__(message)
        self.step = step
        self.t = t


class InvalidScenario(VatrackError, ValueError):
    """Scenario failed validation; ``key`` names the offending field."""

    def __init__(self, message, key=None, line=None):
        if key is not None:
            message = f"{key}: {message}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line


class InvalidGain(VatrackError, ValueError):
    """A configuration field is out of range; ``field`` names it."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
