"""Exceptions raised by typed-crf."""


class TypedCrfError(Exception):
    """Base class of every error raised by this package."""


class InvalidArgumentError(TypedCrfError, ValueError):
    """An argument is outside its documented domain."""


class DimensionError(TypedCrfError, ValueError):
    """Shapes of instances, labelings or weights do not agree."""


class UnsupportedFactorError(TypedCrfError):
    """The factor kind is not one of the supported hard logic factors."""


class UnsatisfiableError(TypedCrfError):
    """No assignment satisfies every hard factor."""


class CapacityError(TypedCrfError):
    """The problem is too large for exhaustive enumeration."""


class SearchLimitError(TypedCrfError):
    """A bounded search gave up before finding or ruling out a solution."""


class InvalidConstraintError(TypedCrfError):
    """A node-state constraint does not resolve against the graph."""


class DegenerateDataError(TypedCrfError):
    """Training data cannot determine a model (e.g. a single class)."""


class DatasetParseError(TypedCrfError):
    """A dataset, predictions or model file is malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ExperimentError(TypedCrfError):
    """An experiment series failed; ``report`` holds the rows computed so far."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
