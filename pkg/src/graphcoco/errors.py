"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class GraphCocoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GraphCocoError):
    """Invalid configuration value or schema violation."""


class DataError(GraphCocoError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """Unparseable dataset file; carries file name and line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class CheckpointError(DataError):
    """Corrupt or truncated checkpoint file."""


class NumericError(GraphCocoError):
    """Non-finite value or numerically undefined operation."""


class ShapeError(GraphCocoError):
    """Incompatible tensor shapes; message names both shapes."""
