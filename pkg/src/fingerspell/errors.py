"""Exception hierarchy shared by every module.

ValidationError covers bad user input (malformed files, out-of-range values,
impossible configurations) and maps to CLI exit code 1.  ModelError covers
runtime failures inside training or inference (divergence, corrupt
checkpoints) and maps to exit code 2.
"""


class FingerspellError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FingerspellError):
    """Invalid input data or configuration."""


class ParseError(ValidationError):
    """Malformed on-disk file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ModelError(FingerspellError):
    """Runtime failure in a model operation (NaN loss, bad checkpoint, ...)."""
