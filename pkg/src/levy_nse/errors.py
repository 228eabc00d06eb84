"""Exception hierarchy shared by all modules."""


class LevyNSEError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(LevyNSEError, ValueError):
    """An argument is outside its admissible range."""


class DiagnosticError(LevyNSEError):
    """A statistical diagnostic cannot be computed from the given data."""


class MomentDivergenceError(ParameterError):
    """Requested moment order is not below the stability index."""


class CalibrationError(LevyNSEError):
    """The damping-shift search did not reach its target."""


class ConfigError(LevyNSEError):
    """Malformed or incomplete configuration file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class BlowUpError(LevyNSEError):
    """Non-finite state encountered during time stepping.

    ``time`` is the simulation time of the last finite state and ``record``
    holds whatever was recorded before the failure (may be ``None``).
    """

    def __init__(self, time, record=None):
        self.time = time
        self.record = record
        super().__init__(f"non-finite state after t={time:.6g}")


class CoverageError(LevyNSEError):
    """A trajectory record does not cover the requested time window."""


class SchemaError(LevyNSEError):
    """Two sample clouds do not share the same observable layout."""
