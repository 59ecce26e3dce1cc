"""Exception hierarchy shared by all modules."""


class DephaseHomError(Exception):
    """Base class for toolkit errors."""


class DomainError(DephaseHomError, ValueError):
    """Argument outside the domain of a formula (e.g. non-positive temperature)."""


class ConsistencyError(DephaseHomError, RuntimeError):
    """An internal invariant failed, such as a covariance that is not PSD."""


class UnsupportedConfigurationError(DephaseHomError, ValueError):
    """The request is well-formed but the estimator does not cover it."""


class FitError(DephaseHomError, RuntimeError):
    """A fit could not produce a usable result.

    ``result`` carries the last iterate when one exists.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ParseError(DephaseHomError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path
