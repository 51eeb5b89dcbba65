"""Exception hierarchy shared by all stages.

Each class carries the CLI exit code it maps to.
"""


class ProtonPipeError(Exception):
    exit_code = 1


class ValidationError(ProtonPipeError, ValueError):
    exit_code = 2


class DimensionError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SymmetryError(ValidationError):
    pass


class ConditioningError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class SectorError(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class ResourceLimitError(ProtonPipeError):
    exit_code = 3


class RoutingError(ProtonPipeError):
    exit_code = 4


class StageError(ProtonPipeError):
    exit_code = 4
