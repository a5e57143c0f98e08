"""Exception hierarchy shared by every module.

CLI exit codes are derived from these classes: ``InputError`` subclasses map
to exit code 2, ``NumericalError`` to exit code 3.
"""


class GeosupError(Exception):
    """Base class for all package errors."""


class InputError(GeosupError, ValueError):
    """Malformed or out-of-contract input (exit code 2)."""


class InvalidInputError(InputError):
    pass


class BehindCameraError(InvalidInputError):
    pass


class DegenerateConfigurationError(InvalidInputError):
    pass


class FormatError(InputError):
    pass


class ParseError(InputError):
    pass


class ValidationError(InputError):
    pass


class MappingError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class EmptyEvaluationError(InputError):
    pass


class NumericalError(GeosupError, ArithmeticError):
    """Non-finite values detected during optimization (exit code 3)."""

    def __init__(self, term, message=None):
        self.term = term
        super().__init__(message or f"non-finite gradient in loss term '{term}'")
