"""Exception types shared across the package.

Every error carries a short machine-parsable ``code`` so the CLI can emit
single-line diagnostics and map failures to exit codes.
"""


class FailcastError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class ConfigError(FailcastError, ValueError):
    """Invalid run configuration (bad field value, unknown key, ...)."""

    code = "CONFIG"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ShapeError(FailcastError, ValueError):
    """Array shape or length mismatch."""

    code = "SHAPE"


class NonFiniteError(FailcastError, ValueError):
    """NaN or infinity where finite values are required."""

    code = "NONFINITE"


class DataError(FailcastError, ValueError):
    """Invalid data contents (labels outside {0,1}, empty inputs, ...)."""

    code = "DATA"


class TapeError(FailcastError, RuntimeError):
    """Backward tape used after the parameters it recorded were mutated."""

    code = "TAPE"


class ArchiveError(FailcastError, ValueError):
    """Model or trace archive is malformed, truncated or incompatible."""

    code = "ARCHIVE"

    def __init__(self, section: str, message: str):
        self.section = section
        super().__init__(f"archive section '{section}': {message}")
