class JunctionLabError(Exception):
    """Base class for errors raised by junctionlab."""


class ParameterError(JunctionLabError, ValueError):
    pass


class NumericalError(JunctionLabError, RuntimeError):
    pass


class ConvergenceError(NumericalError):
    pass


class ResolutionError(JunctionLabError, ValueError):
    pass


class InversionError(JunctionLabError, ValueError):
    pass


class UnsupportedRegimeError(JunctionLabError, ValueError):
    pass


class InsufficientDataError(JunctionLabError, ValueError):
    pass


class DegenerateModelError(JunctionLabError, ValueError):
    pass


class IdentifiabilityError(DegenerateModelError):
    pass


class ExtractionError(JunctionLabError, ValueError):
    pass


class ParseError(JunctionLabError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
