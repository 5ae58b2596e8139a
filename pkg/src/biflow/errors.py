"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code so scripted pipelines can branch on
failure kind: configuration -> 2, divergence/training -> 3, format/IO -> 4.
"""


class BiflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BiflowError):
    """Bad shapes, bad enum values, incompatible model/sampler combinations."""

    exit_code = 2


class DivergenceError(BiflowError):
    """An ODE solve could not proceed (step underflow or non-finite state)."""

    exit_code = 3

    def __init__(self, message, coordinate=None, evals=0):
        super().__init__(message)
        self.coordinate = coordinate
        self.evals = evals


class TrainingError(BiflowError):
    """Non-finite loss or gradient during optimization."""

    exit_code = 3

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class FormatError(BiflowError):
    """Malformed binary file (bad magic, truncation, checksum, version)."""

    exit_code = 4

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
