"""Exception hierarchy shared by all xling modules.

The CLI maps these onto exit codes: configuration problems exit with 1,
malformed input data with 2, numerical failures with 3.
"""


class XlingError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ConfigError(XlingError):
    exit_code = 1


class FormatError(XlingError, ValueError):
    """Input file does not follow its documented format."""


class SchemaError(FormatError):
    pass


class DegenerateInputError(XlingError, ValueError):
    """Zero vectors or other inputs for which a quantity is undefined."""

    exit_code = 3


class ShapeError(XlingError, ValueError):
    pass


class InsufficientDataError(XlingError, ValueError):
    exit_code = 3


class AlignmentError(XlingError):
    pass


class ConstructionError(XlingError):
    pass


class TrainingError(XlingError, ValueError):
    pass


class NumericalError(XlingError, ArithmeticError):
    exit_code = 3
