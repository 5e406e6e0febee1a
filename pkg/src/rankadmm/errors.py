"""Exception types shared across the package."""


class RankAdmmError(Exception):
    """Base class for all package errors."""


class DimensionError(RankAdmmError):
    """Shapes of the supplied arrays are inconsistent."""


class InvalidParameterError(RankAdmmError):
    """A configuration or scheme parameter is outside its valid range."""


class DataFormatError(RankAdmmError):
    """A data file could not be parsed.

    Carries the 1-based line number when the failure is tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SolverError(RankAdmmError):
    """An inner or outer solve failed irrecoverably."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration
