"""Exception hierarchy for concord.

Every exception carries a short machine-parsable ``code`` and the process ``exit_code`` the command-line interface
uses when the exception escapes a subcommand.
"""
from pathlib import Path
from typing import Optional, Union


class ConcordError(Exception):
    """Base class for every error raised deliberately by concord."""
    code = "CONCORD_ERROR"
    exit_code = 1


class InvalidInputError(ConcordError, ValueError):
    """Arguments violate an operation's preconditions."""
    code = "INVALID_INPUT"
    exit_code = 3


class DegenerateInputError(InvalidInputError):
    """Input is well-formed but leaves the estimator undefined, e.g. no good measurements for the conservative
    estimator."""
    code = "DEGENERATE_INPUT"


class SingularCalibrationError(InvalidInputError):
    """A miscalibration slope of zero cannot be inverted."""
    code = "SINGULAR_CALIBRATION"
    exit_code = 4


class SingularFitError(ConcordError, ArithmeticError):
    """A regression design matrix is singular and no ridge penalty is available to regularise it."""
    code = "SINGULAR_FIT"
    exit_code = 4


class TrainingFailureError(ConcordError, RuntimeError):
    """Every random restart of a model fit failed."""
    code = "TRAINING_FAILURE"
    exit_code = 4


class UndefinedMetricError(ConcordError, ArithmeticError):
    """A metric is undefined for the given data, e.g. R² on constant actuals."""
    code = "UNDEFINED_METRIC"
    exit_code = 4


class DataError(ConcordError, ValueError):
    """Input data files are malformed or inconsistent."""
    code = "DATA_ERROR"
    exit_code = 3


class ParseError(DataError):
    """A data file could not be parsed. ``line`` is 1-based and counts the header row."""
    code = "PARSE_ERROR"

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f", line {line}"
            location += ": "
        super().__init__(location + message)
        self.path = path
        self.line = line


class ConflictError(ParseError):
    """The same (quantity, instrument) key appears more than once."""
    code = "CONFLICT"

    def __init__(self, key: tuple, path: Optional[Union[str, Path]] = None, line: Optional[int] = None):
        super().__init__(f"duplicate (quantity_id, instrument_id) = {key}", path, line)
        self.key = key


class ConfigError(ConcordError, ValueError):
    """A run configuration is invalid."""
    code = "CONFIG_ERROR"
    exit_code = 2


class MissingPathError(ConfigError, FileNotFoundError):
    """A path named by the configuration does not exist."""
    code = "MISSING_PATH"
