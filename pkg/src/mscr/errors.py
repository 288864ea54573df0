"""Exception hierarchy.

Validation problems (bad input, bad config, undefined quantities) derive from
:class:`ValidationError` and map to CLI exit code 2; everything else that goes
wrong while computing maps to exit code 3.
"""


class MSCRError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MSCRError, ValueError):
    pass


class DatasetError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedSeparationError(ValidationError):
    pass


class UndefinedMSCRError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class PredictionJoinError(ValidationError):
    pass


class RunError(MSCRError, RuntimeError):
    def __init__(self, run_index, cause):
        super().__init__(f"run {run_index} failed: {cause!r}")
        self.run_index = run_index
        self.cause = cause
